#include "spk/nn.hpp"

namespace spk::nn {

std::vector<std::vector<std::size_t>> shape_propagate(const EncoderConfig& config) {
  std::vector<std::vector<std::size_t>> shapes;
  std::size_t c = 1, h = config.input_rows, w = config.input_cols;
  bool flat = false;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    std::visit(
        [&](const auto& layer) {
          using L = std::decay_t<decltype(layer)>;
          if (flat && !std::is_same_v<L, Dense> && !std::is_same_v<L, Relu> &&
              !std::is_same_v<L, Dropout>)
            throw std::invalid_argument("spatial layer after Dense at index " +
                                        std::to_string(i));
          if constexpr (std::is_same_v<L, Conv3x3>) {
            if (layer.stride != 1 && layer.stride != 2)
              throw std::invalid_argument("Conv3x3 stride must be 1 or 2");
            c = layer.out_channels;
            h = (h + std::size_t(layer.stride) - 1) / std::size_t(layer.stride);
            w = (w + std::size_t(layer.stride) - 1) / std::size_t(layer.stride);
          } else if constexpr (std::is_same_v<L, ResidualBlock>) {
            if (layer.n_convs != 2 && layer.n_convs != 3)
              throw std::invalid_argument("ResidualBlock n_convs must be 2 or 3");
            c = layer.channels;
          } else if constexpr (std::is_same_v<L, TemporalAvgPool>) {
            if (h != layer.rows)
              throw std::invalid_argument(
                  "TemporalAvgPool expects " + std::to_string(layer.rows) +
                  " rows, stack provides " + std::to_string(h));
            h = 1;
          } else if constexpr (std::is_same_v<L, Dense>) {
            c = layer.out_dim;
            h = w = 1;
            flat = true;
          }
          // Relu / Dropout leave the shape untouched
        },
        config.layers[i]);
    if (flat)
      shapes.push_back({c});
    else
      shapes.push_back({c, h, w});
  }
  if (config.embedding_dim != 0) {
    const std::size_t final_dim = flat ? c : c * h * w;
    if (final_dim != config.embedding_dim)
      throw std::invalid_argument("final layer output dim " + std::to_string(final_dim) +
                                  " != embedding_dim " +
                                  std::to_string(config.embedding_dim));
  }
  return shapes;
}

EncoderConfig resnet20_config(std::size_t embedding_dim) {
  EncoderConfig cfg;
  cfg.embedding_dim = embedding_dim;
  cfg.input_rows = 300;
  cfg.input_cols = 257;
  auto stage = [&](std::size_t channels, int residual_blocks) {
    cfg.layers.push_back(Conv3x3{channels, 2});
    cfg.layers.push_back(Relu{});
    for (int i = 0; i < residual_blocks; ++i)
      cfg.layers.push_back(ResidualBlock{channels, 2});
  };
  stage(64, 1);   // conv1_1 .. conv1_3            -> 150x129
  stage(128, 2);  // conv2_1 .. conv2_5            -> 75x65
  stage(256, 4);  // conv3_1 .. conv3_9            -> 38x33
  stage(512, 1);  // conv4_1 .. conv4_3            -> 19x17
  cfg.layers.push_back(TemporalAvgPool{19});  // pool1 -> 1x17
  cfg.layers.push_back(Dense{embedding_dim}); // fc5
  return cfg;
}

EncoderConfig small_encoder_config(std::size_t embedding_dim, std::size_t input_rows,
                                   std::size_t input_cols, double dropout_p) {
  EncoderConfig cfg;
  cfg.embedding_dim = embedding_dim;
  cfg.input_rows = input_rows;
  cfg.input_cols = input_cols;
  std::size_t h = input_rows;
  for (std::size_t channels : {8u, 16u, 32u, 64u}) {
    cfg.layers.push_back(Conv3x3{channels, 2});
    cfg.layers.push_back(Relu{});
    h = (h + 1) / 2;
  }
  cfg.layers.push_back(TemporalAvgPool{h});
  if (dropout_p > 0.0) cfg.layers.push_back(Dropout{dropout_p});
  cfg.layers.push_back(Dense{embedding_dim});
  return cfg;
}

}  // namespace spk::nn
