#include "spk/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace spk::cli {

namespace {

constexpr const char* kMagic = "SPKCKPT 1";

void write_params(std::ostream& f, const std::string& group,
                  const nn::ParamSet<float>& set) {
  for (std::size_t i = 0; i < set.tensors.size(); ++i) {
    const auto& t = set.tensors[i];
    f << "tensor " << group << set.names[i] << " " << t.shape.size();
    for (auto d : t.shape) f << " " << d;
    f << "\n";
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot create checkpoint: " + path);
  f << kMagic << "\n";
  f << "iteration " << ckpt.iteration << "\n";
  f << "n_classes " << ckpt.n_classes << "\n";
  f << "config_begin\n" << serialize_config(ckpt.config) << "config_end\n";
  f << "tensor_count " << ckpt.params.tensors.size() + ckpt.velocity.tensors.size()
    << "\n";
  write_params(f, "p:", ckpt.params);
  write_params(f, "v:", ckpt.velocity);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string line;
  std::getline(f, line);
  if (line != kMagic) throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint ckpt;
  std::getline(f, line);
  if (line.rfind("iteration ", 0) != 0) throw std::runtime_error("bad checkpoint header");
  ckpt.iteration = std::stoll(line.substr(10));
  std::getline(f, line);
  if (line.rfind("n_classes ", 0) != 0) throw std::runtime_error("bad checkpoint header");
  ckpt.n_classes = std::stoul(line.substr(10));

  std::getline(f, line);
  if (line != "config_begin") throw std::runtime_error("bad checkpoint header");
  std::ostringstream cfg;
  while (std::getline(f, line) && line != "config_end") cfg << line << "\n";
  if (line != "config_end") throw std::runtime_error("truncated checkpoint header");
  ckpt.config = parse_config(cfg.str());

  std::getline(f, line);
  if (line.rfind("tensor_count ", 0) != 0)
    throw std::runtime_error("bad checkpoint header");
  const std::size_t count = std::stoul(line.substr(13));

  for (std::size_t k = 0; k < count; ++k) {
    std::getline(f, line);
    std::istringstream iss(line);
    std::string tag, name;
    std::size_t ndim;
    if (!(iss >> tag >> name >> ndim) || tag != "tensor")
      throw std::runtime_error("bad tensor header in checkpoint");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape)
      if (!(iss >> d)) throw std::runtime_error("bad tensor shape in checkpoint");
    TensorF t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!f) throw std::runtime_error("truncated tensor data in checkpoint");
    if (name.rfind("p:", 0) == 0) {
      ckpt.params.names.push_back(name.substr(2));
      ckpt.params.tensors.push_back(std::move(t));
    } else if (name.rfind("v:", 0) == 0) {
      ckpt.velocity.names.push_back(name.substr(2));
      ckpt.velocity.tensors.push_back(std::move(t));
    } else {
      throw std::runtime_error("unknown tensor group in checkpoint: " + name);
    }
  }
  return ckpt;
}

}  // namespace spk::cli
