#include "spk/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spk::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::vector<ManifestRecord> Manifest::subset(const std::string& split) const {
  std::vector<ManifestRecord> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r);
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  Manifest m;
  std::map<std::string, int> interned;
  std::string line;
  bool first = true;
  std::map<std::string, bool> seen_paths;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (first && line == "path,speaker,split") {
      first = false;
      continue;
    }
    first = false;
    const auto cols = split_csv(line);
    if (cols.size() != 3)
      throw std::runtime_error("manifest row needs 3 columns: " + line);
    if (cols[2] != "train" && cols[2] != "val" && cols[2] != "test")
      throw std::runtime_error("unknown split '" + cols[2] + "' in manifest");
    if (seen_paths.count(cols[0]))
      throw std::runtime_error("duplicate path in manifest: " + cols[0]);
    seen_paths[cols[0]] = true;
    auto it = interned.find(cols[1]);
    int id;
    if (it == interned.end()) {
      id = static_cast<int>(m.speaker_names.size());
      interned.emplace(cols[1], id);
      m.speaker_names.push_back(cols[1]);
    } else {
      id = it->second;
    }
    m.records.push_back({cols[0], id, cols[2]});
  }
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot create manifest: " + path);
  f << "path,speaker,split\n";
  for (const auto& r : m.records)
    f << r.path << "," << m.speaker_names[std::size_t(r.speaker)] << "," << r.split
      << "\n";
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string layers_to_string(const std::vector<nn::LayerConfig>& layers) {
  std::string out;
  for (const auto& l : layers) {
    if (!out.empty()) out += " ";
    std::visit(
        [&](const auto& layer) {
          using L = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<L, nn::Conv3x3>)
            out += "conv(" + std::to_string(layer.out_channels) + "," +
                   std::to_string(layer.stride) + ")";
          else if constexpr (std::is_same_v<L, nn::ResidualBlock>)
            out += "res(" + std::to_string(layer.channels) + "," +
                   std::to_string(layer.n_convs) + ")";
          else if constexpr (std::is_same_v<L, nn::Relu>)
            out += "relu";
          else if constexpr (std::is_same_v<L, nn::TemporalAvgPool>)
            out += "pool(" + std::to_string(layer.rows) + ")";
          else if constexpr (std::is_same_v<L, nn::Dense>)
            out += "dense(" + std::to_string(layer.out_dim) + ")";
          else if constexpr (std::is_same_v<L, nn::Dropout>)
            out += "dropout(" + format_double(layer.p) + ")";
        },
        l);
  }
  return out;
}

std::vector<nn::LayerConfig> layers_from_string(const std::string& text) {
  std::vector<nn::LayerConfig> layers;
  std::istringstream iss(text);
  std::string tok;
  while (iss >> tok) {
    const auto paren = tok.find('(');
    const std::string name = tok.substr(0, paren);
    std::vector<std::string> args;
    if (paren != std::string::npos) {
      if (tok.back() != ')') throw std::runtime_error("bad layer token: " + tok);
      args = split_csv(tok.substr(paren + 1, tok.size() - paren - 2));
    }
    auto want = [&](std::size_t n) {
      if (args.size() != n) throw std::runtime_error("bad layer token: " + tok);
    };
    if (name == "conv") {
      want(2);
      layers.push_back(nn::Conv3x3{std::stoul(args[0]), std::stoi(args[1])});
    } else if (name == "res") {
      want(2);
      layers.push_back(nn::ResidualBlock{std::stoul(args[0]), std::stoi(args[1])});
    } else if (name == "relu") {
      want(0);
      layers.push_back(nn::Relu{});
    } else if (name == "pool") {
      want(1);
      layers.push_back(nn::TemporalAvgPool{std::stoul(args[0])});
    } else if (name == "dense") {
      want(1);
      layers.push_back(nn::Dense{std::stoul(args[0])});
    } else if (name == "dropout") {
      want(1);
      layers.push_back(nn::Dropout{std::stod(args[0])});
    } else {
      throw std::runtime_error("unknown layer '" + name + "'");
    }
  }
  return layers;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[audio]\n";
  o << "sample_rate = " << c.sample_rate << "\n";
  o << "crop_len = " << c.crop_len << "\n";
  o << "reverse_prob = " << format_double(c.reverse_prob) << "\n";
  o << "train_augment = " << (c.train_augment ? 1 : 0) << "\n";
  o << "test_augment = " << (c.test_augment ? 1 : 0) << "\n";
  o << "\n[features]\n";
  o << "win_len = " << c.win_len << "\n";
  o << "hop = " << c.hop << "\n";
  o << "fft_size = " << c.fft_size << "\n";
  o << "\n[encoder]\n";
  o << "layers = " << layers_to_string(c.encoder.layers) << "\n";
  o << "embedding_dim = " << c.encoder.embedding_dim << "\n";
  o << "input_rows = " << c.encoder.input_rows << "\n";
  o << "input_cols = " << c.encoder.input_cols << "\n";
  o << "\n[loss]\n";
  o << "kind = " << loss::loss_kind_name(c.loss.kind) << "\n";
  o << "m = " << c.loss.m << "\n";
  o << "lambda_base = " << format_double(c.loss.lambda_base) << "\n";
  o << "lambda_min = " << format_double(c.loss.lambda_min) << "\n";
  o << "gamma = " << format_double(c.loss.gamma) << "\n";
  o << "scale = " << format_double(c.loss.scale) << "\n";
  o << "margin = " << format_double(c.loss.margin) << "\n";
  o << "alpha = " << format_double(c.loss.alpha) << "\n";
  o << "\n[optimizer]\n";
  o << "momentum = " << format_double(c.momentum) << "\n";
  o << "weight_decay = " << format_double(c.weight_decay) << "\n";
  o << "initial_lr = " << format_double(c.schedule.initial_lr) << "\n";
  o << "lr_factor = " << format_double(c.schedule.factor) << "\n";
  o << "lr_steps = " << c.schedule.n_steps << "\n";
  o << "iters_per_step = " << c.schedule.iters_per_step << "\n";
  o << "\n[train]\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "iterations = " << c.iterations << "\n";
  o << "seed = " << c.seed << "\n";
  o << "n_crops = " << c.n_crops << "\n";
  return o.str();
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;  // "section.key" -> value
  std::istringstream iss(text);
  std::string line, section;
  while (std::getline(iss, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("bad config line: " + line);
    kv[section + "." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("config missing key: " + key);
    return it->second;
  };
  RunConfig c;
  c.sample_rate = std::stoi(get("audio.sample_rate"));
  c.crop_len = std::stoul(get("audio.crop_len"));
  c.reverse_prob = std::stod(get("audio.reverse_prob"));
  c.train_augment = std::stoi(get("audio.train_augment")) != 0;
  c.test_augment = std::stoi(get("audio.test_augment")) != 0;
  c.win_len = std::stoul(get("features.win_len"));
  c.hop = std::stoul(get("features.hop"));
  c.fft_size = std::stoul(get("features.fft_size"));
  c.encoder.layers = layers_from_string(get("encoder.layers"));
  c.encoder.embedding_dim = std::stoul(get("encoder.embedding_dim"));
  c.encoder.input_rows = std::stoul(get("encoder.input_rows"));
  c.encoder.input_cols = std::stoul(get("encoder.input_cols"));
  c.loss.kind = loss::loss_kind_from_name(get("loss.kind"));
  c.loss.m = std::stoi(get("loss.m"));
  c.loss.lambda_base = std::stod(get("loss.lambda_base"));
  c.loss.lambda_min = std::stod(get("loss.lambda_min"));
  c.loss.gamma = std::stod(get("loss.gamma"));
  c.loss.scale = std::stod(get("loss.scale"));
  c.loss.margin = std::stod(get("loss.margin"));
  c.loss.alpha = std::stod(get("loss.alpha"));
  c.momentum = std::stod(get("optimizer.momentum"));
  c.weight_decay = std::stod(get("optimizer.weight_decay"));
  c.schedule.initial_lr = std::stod(get("optimizer.initial_lr"));
  c.schedule.factor = std::stod(get("optimizer.lr_factor"));
  c.schedule.n_steps = std::stoi(get("optimizer.lr_steps"));
  c.schedule.iters_per_step = std::stoi(get("optimizer.iters_per_step"));
  c.batch_size = std::stoul(get("train.batch_size"));
  c.iterations = std::stoll(get("train.iterations"));
  c.seed = std::stoull(get("train.seed"));
  c.n_crops = std::stoul(get("train.n_crops"));
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot create config: " + path);
  f << serialize_config(cfg);
}

}  // namespace spk::cli
