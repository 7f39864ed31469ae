#include "lsnet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lsnet {

void NetworkConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("config: classes must be >= 1");
  if (input_channels < 1) throw std::invalid_argument("config: input channels must be >= 1");
  if (levels.empty()) throw std::invalid_argument("config: at least one level required");
  for (const Level& l : levels) {
    if (l.d_out < 1 || l.k < 1 || l.ratio < 1) throw std::invalid_argument("config: bad level parameters");
    if (branches.size() == 2 && l.d_out % 2 != 0)
      throw std::invalid_argument("config: level width must be even with two branches");
    if (l.d_out / static_cast<int>(branches.size()) < 1)
      throw std::invalid_argument("config: level width smaller than branch count");
  }
  if (branches.empty() || branches.size() > 4) throw std::invalid_argument("config: 1-4 branches required");
  for (size_t i = 0; i < branches.size(); ++i)
    for (size_t j = i + 1; j < branches.size(); ++j)
      if (branches[i] == branches[j]) throw std::invalid_argument("config: duplicate branch projection");
  if (head_hidden < 1) throw std::invalid_argument("config: head width must be >= 1");
  if (block_size < 1) throw std::invalid_argument("config: block size must be >= 1");
}

double TrainConfig::lr_at(int epoch) const { return lr0 * std::pow(lr_decay, epoch); }

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long to_long(const std::string& key, const std::string& v) {
  long x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return x;
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
  return out;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::map<int, NetworkConfig::Level> level_overrides;
  int level_count = -1;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key=value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));

    if (key == "data.path") cfg.data_path = val;
    else if (key == "out.metrics") cfg.out_metrics = val;
    else if (key == "out.checkpoint") cfg.out_checkpoint = val;
    else if (key == "out.state") cfg.out_state = val;
    else if (key == "out.preds") cfg.out_preds = val;
    else if (key == "out.labels") cfg.out_labels = val;
    else if (key == "resume") cfg.resume_state = val;
    else if (key == "net.classes") cfg.net.num_classes = static_cast<int>(to_long(key, val));
    else if (key == "net.input_channels") cfg.net.input_channels = static_cast<int>(to_long(key, val));
    else if (key == "net.head_hidden") cfg.net.head_hidden = static_cast<int>(to_long(key, val));
    else if (key == "net.block_size") cfg.net.block_size = static_cast<int>(to_long(key, val));
    else if (key == "net.fma_pool") cfg.net.fma_pool = pool_mode_from_name(val);
    else if (key == "net.branches") {
      cfg.net.branches.clear();
      for (const std::string& tok : split_csv(val)) cfg.net.branches.push_back(projection_from_name(tok));
    } else if (key == "net.levels") {
      level_count = static_cast<int>(to_long(key, val));
      if (level_count < 1) throw std::invalid_argument("config: net.levels must be >= 1");
    } else if (key.rfind("level.", 0) == 0) {
      size_t dot = key.find('.', 6);
      if (dot == std::string::npos) throw std::invalid_argument("config: bad level key '" + key + "'");
      int idx = static_cast<int>(to_long(key, key.substr(6, dot - 6)));  // 1-based in the file
      if (idx < 1) throw std::invalid_argument("config: level index must be >= 1");
      std::string field = key.substr(dot + 1);
      NetworkConfig::Level& l =
          level_overrides.try_emplace(idx - 1, NetworkConfig::Level{}).first->second;
      if (field == "d") l.d_out = static_cast<int>(to_long(key, val));
      else if (field == "k") l.k = static_cast<int>(to_long(key, val));
      else if (field == "ratio") l.ratio = static_cast<int>(to_long(key, val));
      else throw std::invalid_argument("config: unknown level field '" + field + "'");
    } else if (key == "train.epochs") cfg.train.epochs = static_cast<int>(to_long(key, val));
    else if (key == "train.batch") cfg.train.batch_size = static_cast<int>(to_long(key, val));
    else if (key == "train.lr0") cfg.train.lr0 = to_double(key, val);
    else if (key == "train.lr_decay") cfg.train.lr_decay = to_double(key, val);
    else if (key == "train.seed") cfg.train.seed = static_cast<uint64_t>(to_long(key, val));
    else if (key == "train.steps_per_epoch") cfg.train.steps_per_epoch = static_cast<int>(to_long(key, val));
    else if (key == "train.early_stop_miou") cfg.train.early_stop_miou = to_double(key, val);
    else if (key == "train.precision") {
      if (val == "f32") cfg.train.precision = Precision::F32;
      else if (val == "f64") cfg.train.precision = Precision::F64;
      else throw std::invalid_argument("config: train.precision must be f32 or f64");
    } else if (key == "augment.rotation") cfg.train.augment_rotation = to_long(key, val) != 0;
    else if (key == "augment.jitter") cfg.train.augment_jitter = to_double(key, val);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  if (level_count > 0 || !level_overrides.empty()) {
    int n = level_count > 0 ? level_count : 0;
    for (const auto& [idx, l] : level_overrides) n = std::max(n, idx + 1);
    std::vector<NetworkConfig::Level> levels;
    for (int i = 0; i < n; ++i) {
      auto it = level_overrides.find(i);
      if (it != level_overrides.end()) levels.push_back(it->second);
      else if (i < static_cast<int>(cfg.net.levels.size())) levels.push_back(cfg.net.levels[static_cast<size_t>(i)]);
      else levels.push_back(NetworkConfig::Level{});
    }
    cfg.net.levels = std::move(levels);
  }

  if (cfg.train.epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (cfg.train.batch_size < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (!(cfg.train.lr0 > 0) || !(cfg.train.lr_decay > 0))
    throw std::invalid_argument("config: learning-rate settings must be positive");
  cfg.net.validate();
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  if (!cfg.data_path.empty()) out << "data.path=" << cfg.data_path << "\n";
  if (!cfg.out_metrics.empty()) out << "out.metrics=" << cfg.out_metrics << "\n";
  if (!cfg.out_checkpoint.empty()) out << "out.checkpoint=" << cfg.out_checkpoint << "\n";
  if (!cfg.out_state.empty()) out << "out.state=" << cfg.out_state << "\n";
  if (!cfg.out_preds.empty()) out << "out.preds=" << cfg.out_preds << "\n";
  if (!cfg.out_labels.empty()) out << "out.labels=" << cfg.out_labels << "\n";
  if (!cfg.resume_state.empty()) out << "resume=" << cfg.resume_state << "\n";
  out << "net.classes=" << cfg.net.num_classes << "\n";
  out << "net.input_channels=" << cfg.net.input_channels << "\n";
  out << "net.branches=";
  for (size_t i = 0; i < cfg.net.branches.size(); ++i)
    out << (i ? "," : "") << projection_name(cfg.net.branches[i]);
  out << "\n";
  out << "net.fma_pool=" << pool_mode_name(cfg.net.fma_pool) << "\n";
  out << "net.head_hidden=" << cfg.net.head_hidden << "\n";
  out << "net.block_size=" << cfg.net.block_size << "\n";
  out << "net.levels=" << cfg.net.levels.size() << "\n";
  for (size_t i = 0; i < cfg.net.levels.size(); ++i) {
    out << "level." << i + 1 << ".d=" << cfg.net.levels[i].d_out << "\n";
    out << "level." << i + 1 << ".k=" << cfg.net.levels[i].k << "\n";
    out << "level." << i + 1 << ".ratio=" << cfg.net.levels[i].ratio << "\n";
  }
  out << "train.epochs=" << cfg.train.epochs << "\n";
  out << "train.batch=" << cfg.train.batch_size << "\n";
  out << "train.lr0=" << cfg.train.lr0 << "\n";
  out << "train.lr_decay=" << cfg.train.lr_decay << "\n";
  out << "train.seed=" << cfg.train.seed << "\n";
  out << "train.precision=" << (cfg.train.precision == Precision::F32 ? "f32" : "f64") << "\n";
  if (cfg.train.steps_per_epoch > 0) out << "train.steps_per_epoch=" << cfg.train.steps_per_epoch << "\n";
  if (cfg.train.early_stop_miou > 0) out << "train.early_stop_miou=" << cfg.train.early_stop_miou << "\n";
  if (cfg.train.augment_rotation) out << "augment.rotation=1\n";
  if (cfg.train.augment_jitter > 0) out << "augment.jitter=" << cfg.train.augment_jitter << "\n";
  return out.str();
}

}  // namespace lsnet
