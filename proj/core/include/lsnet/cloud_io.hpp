#pragma once
#include <string>

#include "lsnet/point_cloud.hpp"

namespace lsnet {

enum class CloudFormat { Ascii, Binary };

// Canonical point file.
//   ascii:  header line "N C L", then N lines "x y z [c1..cC] [label]",
//           whitespace-separated, '.' decimal separator, 9 significant digits
//           on write.
//   binary: magic "LSPC", three little-endian u32 (N, C, L), then N records of
//           (3+C) little-endian f32 followed by one little-endian u32 label
//           when L=1.
PointCloud load_cloud(const std::string& path, CloudFormat format);
void write_cloud(const PointCloud& cloud, const std::string& path, CloudFormat format);

// infers the format from the LSPC magic
PointCloud load_cloud_auto(const std::string& path);

}  // namespace lsnet
