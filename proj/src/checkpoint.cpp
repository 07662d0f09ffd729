#include "dsqa/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace dsqa {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[9] = "DSQA0001";
constexpr int kFormatVersion = 1;

void append_tensor(std::vector<float>& payload, const Eigen::Ref<const Eigen::MatrixXd>& t) {
  for (Eigen::Index r = 0; r < t.rows(); ++r)
    for (Eigen::Index c = 0; c < t.cols(); ++c) payload.push_back(static_cast<float>(t(r, c)));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelBundle& bundle) {
  bundle.params.validate();
  bundle.schedule.validate();

  ordered_json header;
  header["format_version"] = kFormatVersion;
  header["arch"] = {{"in_dim", bundle.params.arch.in_dim},
                    {"hidden_dims", bundle.params.arch.hidden_dims},
                    {"embed_dim", bundle.params.arch.embed_dim}};
  header["sigma_data"] = bundle.params.sigma_data;
  header["schedule"] = {{"sigma_min", bundle.schedule.sigma_min},
                        {"sigma_max", bundle.schedule.sigma_max},
                        {"rho", bundle.schedule.rho},
                        {"num_steps", bundle.schedule.num_steps}};
  header["feature"] = {{"sample_rate", bundle.feature.sample_rate},
                       {"n_fft", bundle.feature.n_fft},
                       {"hop", bundle.feature.hop},
                       {"n_mels", bundle.feature.n_mels},
                       {"fmin", bundle.feature.fmin},
                       {"fmax", bundle.feature.fmax},
                       {"log_floor", bundle.feature.log_floor}};
  header["norm"] = {{"mean", bundle.params.feature_mean}, {"std", bundle.params.feature_std}};

  ordered_json tensors = ordered_json::array();
  std::vector<float> payload;
  for (std::size_t l = 0; l < bundle.params.layers.size(); ++l) {
    const auto& layer = bundle.params.layers[l];
    tensors.push_back({{"name", "layers." + std::to_string(l) + ".weight"},
                       {"shape", {layer.weight.rows(), layer.weight.cols()}}});
    tensors.push_back({{"name", "layers." + std::to_string(l) + ".bias"},
                       {"shape", {layer.bias.size()}}});
    append_tensor(payload, layer.weight);
    append_tensor(payload, layer.bias);
  }
  header["tensors"] = tensors;

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, 8);
  const std::uint32_t header_len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());

  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != kMagic)
    throw std::runtime_error("load_checkpoint: bad magic: " + path.string());
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in) throw std::runtime_error("load_checkpoint: truncated header length");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (!in) throw std::runtime_error("load_checkpoint: truncated header");

  ordered_json header;
  try {
    header = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("load_checkpoint: malformed header: ") + e.what());
  }
  if (header.at("format_version").get<int>() != kFormatVersion)
    throw std::runtime_error("load_checkpoint: unknown format_version " +
                             header.at("format_version").dump());

  ModelBundle bundle;
  const auto& arch = header.at("arch");
  bundle.params.arch.in_dim = arch.at("in_dim").get<Eigen::Index>();
  bundle.params.arch.hidden_dims = arch.at("hidden_dims").get<std::vector<Eigen::Index>>();
  bundle.params.arch.embed_dim = arch.at("embed_dim").get<Eigen::Index>();
  bundle.params.sigma_data = header.at("sigma_data").get<double>();

  const auto& schedule = header.at("schedule");
  bundle.schedule.sigma_min = schedule.at("sigma_min").get<double>();
  bundle.schedule.sigma_max = schedule.at("sigma_max").get<double>();
  bundle.schedule.rho = schedule.at("rho").get<double>();
  bundle.schedule.num_steps = schedule.at("num_steps").get<int>();

  const auto& feature = header.at("feature");
  bundle.feature.sample_rate = feature.at("sample_rate").get<int>();
  bundle.feature.n_fft = feature.at("n_fft").get<int>();
  bundle.feature.hop = feature.at("hop").get<int>();
  bundle.feature.n_mels = feature.at("n_mels").get<int>();
  bundle.feature.fmin = feature.at("fmin").get<double>();
  bundle.feature.fmax = feature.at("fmax").get<double>();
  bundle.feature.log_floor = feature.at("log_floor").get<double>();

  bundle.params.feature_mean = header.at("norm").at("mean").get<double>();
  bundle.params.feature_std = header.at("norm").at("std").get<double>();

  const auto shapes = bundle.params.arch.layer_shapes();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != shapes.size() * 2)
    throw std::runtime_error("load_checkpoint: unexpected tensor count");

  std::size_t expected_values = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& wt = tensors.at(2 * l);
    const auto& bt = tensors.at(2 * l + 1);
    const std::string wname = "layers." + std::to_string(l) + ".weight";
    const std::string bname = "layers." + std::to_string(l) + ".bias";
    if (wt.at("name").get<std::string>() != wname || bt.at("name").get<std::string>() != bname)
      throw std::runtime_error("load_checkpoint: unexpected tensor table entry at layer " +
                               std::to_string(l));
    const auto wshape = wt.at("shape").get<std::vector<Eigen::Index>>();
    const auto bshape = bt.at("shape").get<std::vector<Eigen::Index>>();
    if (wshape.size() != 2 || wshape[0] != shapes[l].first || wshape[1] != shapes[l].second ||
        bshape.size() != 1 || bshape[0] != shapes[l].first)
      throw std::runtime_error("load_checkpoint: tensor shape mismatch at layer " +
                               std::to_string(l));
    expected_values += static_cast<std::size_t>(shapes[l].first) *
                           static_cast<std::size_t>(shapes[l].second) +
                       static_cast<std::size_t>(shapes[l].first);
  }

  std::vector<float> payload(expected_values);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * 4));
  if (!in || in.gcount() != static_cast<std::streamsize>(payload.size() * 4))
    throw std::runtime_error("load_checkpoint: truncated payload");
  in.peek();
  if (!in.eof()) throw std::runtime_error("load_checkpoint: trailing bytes after payload");

  std::size_t k = 0;
  for (const auto [rows, cols] : shapes) {
    Layer layer;
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = payload[k++];
    layer.bias.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias[r] = payload[k++];
    bundle.params.layers.push_back(std::move(layer));
  }
  bundle.params.validate();
  bundle.schedule.validate();
  return bundle;
}

}  // namespace dsqa
