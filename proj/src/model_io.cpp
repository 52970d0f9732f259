#include "smia/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "smia/error.hpp"

namespace smia::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'M', 'I', 'A', 'M', 'D', 'L', '\0'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail(ErrorKind::schema, path.string() + ": truncated model");
  return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) put(out, std::bit_cast<std::uint64_t>(x));
}

void get_doubles(std::istream& in, std::vector<double>& v, const std::filesystem::path& path) {
  for (auto& x : v) x = std::bit_cast<double>(get<std::uint64_t>(in, path));
}

}  // namespace

void save_model(const std::filesystem::path& path, const SmiaModel& model) {
  nlohmann::json header;
  header["format"] = "smia-model";
  header["embedding_dim"] = model.embedding_dim();
  header["reference_embedding_dim"] = SmiaModel::kReferenceEmbeddingDim;
  header["embedding_dim_deviation"] = model.deviates_from_reference_shape();
  header["dropout_rate"] = model.dropout_rate;
  header["seed"] = model.seed;
  header["epoch_of_best_validation"] = model.epoch_of_best_validation;
  auto layers = nlohmann::json::array();
  for (const auto& l : model.layers()) layers.push_back({{"in", l.in}, {"out", l.out}});
  header["layers"] = layers;
  auto hist = nlohmann::json::array();
  for (const auto& e : model.history) {
    hist.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_loss", e.validation_loss}});
  }
  header["history"] = hist;
  const std::string h = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::config, "cannot write model " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint64_t>(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& l : model.layers()) {
    put_doubles(out, l.weight);
    put_doubles(out, l.bias);
  }
  out.close();
  if (!out) fail(ErrorKind::config, "failed writing model " + path.string());
}

SmiaModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::upstream_missing, "missing model " + path.string() + " (produced by stage 'train')");
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    fail(ErrorKind::schema, path.string() + ": not a model checkpoint");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kModelFormatVersion)
    fail(ErrorKind::schema, path.string() + ": unsupported model version " + std::to_string(version));
  const auto hlen = get<std::uint64_t>(in, path);
  if (hlen > (1u << 26)) fail(ErrorKind::schema, path.string() + ": implausible header length");
  std::string h(hlen, '\0');
  if (!in.read(h.data(), static_cast<std::streamsize>(hlen))) fail(ErrorKind::schema, path.string() + ": truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
    SmiaModel model(header.at("embedding_dim").get<std::size_t>(), header.at("dropout_rate").get<double>());
    model.seed = header.at("seed").get<std::uint64_t>();
    model.epoch_of_best_validation = header.at("epoch_of_best_validation").get<int>();
    const auto& shapes = header.at("layers");
    if (shapes.size() != model.layers().size()) fail(ErrorKind::schema, path.string() + ": wrong layer count");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const auto& l = model.layers()[i];
      if (shapes[i].at("in").get<std::size_t>() != l.in || shapes[i].at("out").get<std::size_t>() != l.out)
        fail(ErrorKind::schema, path.string() + ": layer " + std::to_string(i) + " shape mismatch");
    }
    for (const auto& e : header.at("history")) {
      model.history.push_back({e.at("epoch").get<int>(), e.at("train_loss").get<double>(),
                               e.at("validation_loss").get<double>()});
    }
    for (auto& l : model.layers()) {
      get_doubles(in, l.weight, path);
      get_doubles(in, l.bias, path);
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, path.string() + ": bad model header: " + e.what());
  }
}

}  // namespace smia::nn
