#include "procap/checkpoint.hpp"

#include "json_config.hpp"
#include "procap/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace procap {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr const char* kFormat = "procap-checkpoint";
constexpr int kVersion = 1;

std::size_t align8(std::size_t n) { return (n + 7) & ~std::size_t{7}; }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ProCapModel& model, long step,
                     const std::string& provenance_json) {
  detail::Json header;
  header["format"] = kFormat;
  header["version"] = kVersion;
  header["step"] = step;
  header["model"] = detail::model_config_to_json(model.config(), true);
  header["vocab"] = model.vocab().tokens();
  header["provenance"] = provenance_json.empty() ? detail::Json() : detail::Json::parse(provenance_json);

  std::vector<char> payload;
  detail::Json table = detail::Json::object();
  for (const auto& p : model.params().params()) {
    const Matrix& v = p.tensor.value();
    const std::size_t offset = align8(payload.size());
    table[p.name] = {{"shape", {v.rows(), v.cols()}}, {"dtype", "float32"}, {"byte_offset", offset}};
    payload.resize(offset + static_cast<std::size_t>(v.size()) * sizeof(float));
    char* dst = payload.data() + offset;
    for (Index i = 0; i < v.size(); ++i) {
      const float f = static_cast<float>(v.data()[i]);
      std::memcpy(dst + static_cast<std::size_t>(i) * sizeof(float), &f, sizeof(float));
    }
  }
  header["tensors"] = std::move(table);

  std::string text = header.dump();
  text.append(align8(sizeof(std::uint64_t) + text.size()) - sizeof(std::uint64_t) - text.size(), ' ');
  const std::uint64_t len = text.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kCheckpointLoadFailure, "cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::uint64_t len = 0;
  if (bytes.size() < sizeof(len)) throw Error(ErrorCode::kCheckpointLoadFailure, "truncated checkpoint");
  std::memcpy(&len, bytes.data(), sizeof(len));
  if (len > bytes.size() - sizeof(len)) throw Error(ErrorCode::kCheckpointLoadFailure, "truncated header");
  const std::size_t payload_start = sizeof(len) + len;
  const std::size_t payload_size = bytes.size() - payload_start;

  nlohmann::json header;
  detail::Json provenance;  // keeps key order so a re-save is byte-identical
  try {
    const auto first = bytes.begin() + sizeof(len);
    const auto last = bytes.begin() + static_cast<std::ptrdiff_t>(payload_start);
    header = nlohmann::json::parse(first, last);
    if (header.is_object() && header.contains("provenance")) provenance = detail::Json::parse(first, last)["provenance"];
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("checkpoint header: ") + e.what());
  }

  try {
    if (!header.is_object() || header.value("format", "") != kFormat || header.value("version", 0) != kVersion) {
      throw Error(ErrorCode::kSchemaViolation, "not a version-1 procap checkpoint");
    }
    ModelConfig cfg;
    detail::model_config_from_json(header.at("model"), cfg, true, "checkpoint.model");
    Vocabulary vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    LoadedCheckpoint out{ProCapModel(cfg, std::move(vocab)), header.at("step").get<long>(), ""};
    if (!header.at("provenance").is_null()) out.provenance_json = provenance.dump();

    const auto& table = header.at("tensors");
    if (!table.is_object()) throw Error(ErrorCode::kSchemaViolation, "tensor table must be an object");
    auto& params = out.model.params();
    for (const auto& [name, entry] : table.items()) {
      if (params.find(name) == nullptr) throw Error(ErrorCode::kSchemaViolation, "unknown tensor " + name);
      if (entry.at("dtype").get<std::string>() != "float32") {
        throw Error(ErrorCode::kSchemaViolation, "tensor " + name + " is not float32");
      }
    }
    for (auto& p : params.params()) {
      if (!table.contains(p.name)) throw Error(ErrorCode::kShapeMismatch, "missing tensor " + p.name);
      const auto& entry = table.at(p.name);
      const auto shape = entry.at("shape").get<std::vector<long long>>();
      Matrix& v = p.tensor.mutable_value();
      if (shape.size() != 2 || shape[0] != v.rows() || shape[1] != v.cols()) {
        throw Error(ErrorCode::kShapeMismatch, "tensor " + p.name + " has the wrong shape");
      }
      const auto offset = entry.at("byte_offset").get<std::size_t>();
      const std::size_t nbytes = static_cast<std::size_t>(v.size()) * sizeof(float);
      if (offset > payload_size || nbytes > payload_size - offset) {
        throw Error(ErrorCode::kShapeMismatch, "tensor " + p.name + " runs past the payload");
      }
      const char* src = bytes.data() + payload_start + offset;
      for (Index i = 0; i < v.size(); ++i) {
        float f = 0.0f;
        std::memcpy(&f, src + static_cast<std::size_t>(i) * sizeof(float), sizeof(float));
        v.data()[i] = static_cast<double>(f);
      }
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("checkpoint header: ") + e.what());
  }
}

}  // namespace procap
