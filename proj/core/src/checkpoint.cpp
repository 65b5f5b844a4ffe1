#include "scriptor/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "scriptor/errors.hpp"

namespace scriptor {

namespace {

std::string blob_path_for(const std::string& manifest_path) {
  std::size_t dot = manifest_path.find_last_of('.');
  std::size_t slash = manifest_path.find_last_of('/');
  bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? manifest_path.substr(0, dot) : manifest_path) + ".bin";
}

std::string file_name_of(const std::string& path) {
  std::size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

std::string dir_of(const std::string& path) {
  std::size_t slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

void put_f32_le(std::string& out, float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  out.push_back(static_cast<char>(u & 0xFF));
  out.push_back(static_cast<char>((u >> 8) & 0xFF));
  out.push_back(static_cast<char>((u >> 16) & 0xFF));
  out.push_back(static_cast<char>((u >> 24) & 0xFF));
}

float get_f32_le(const unsigned char* p) {
  std::uint32_t u = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                    (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

void save_checkpoint(const std::string& manifest_path,
                     const std::map<std::string, Tensor>& params, const nlohmann::json& meta) {
  std::string blob_path = blob_path_for(manifest_path);
  std::string blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, t] : params) {  // std::map iterates sorted by name
    if (!t.defined()) throw ParameterError("undefined parameter in checkpoint: " + name);
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.node()->shape;
    e["dtype"] = "f32";
    e["offset"] = blob.size();
    for (double v : t.data()) put_f32_le(blob, static_cast<float>(v));
    entries.push_back(std::move(e));
  }

  nlohmann::json manifest;
  manifest["format"] = "scriptor-checkpoint-v1";
  manifest["blob"] = file_name_of(blob_path);
  manifest["params"] = std::move(entries);
  manifest["meta"] = meta;

  std::ofstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot write checkpoint blob: " + blob_path);
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw IoError("checkpoint blob write failed: " + blob_path);
  bin.close();

  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint manifest: " + manifest_path);
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("checkpoint manifest write failed: " + manifest_path);
}

Checkpoint load_checkpoint(const std::string& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint manifest: " + manifest_path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad checkpoint manifest: ") + e.what());
  }
  if (!manifest.contains("blob") || !manifest.contains("params"))
    throw ParseError("checkpoint manifest missing blob or params");

  std::string blob_path = dir_of(manifest_path) + manifest["blob"].get<std::string>();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw IoError("cannot open checkpoint blob: " + blob_path);
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)),
                                  std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& e : manifest["params"]) {
    std::string name = e.at("name").get<std::string>();
    std::vector<std::int64_t> shape = e.at("shape").get<std::vector<std::int64_t>>();
    if (e.at("dtype").get<std::string>() != "f32")
      throw ParseError("unsupported checkpoint dtype for " + name);
    std::size_t offset = e.at("offset").get<std::size_t>();
    std::int64_t count = 1;
    for (std::int64_t d : shape) {
      if (d < 1) throw ParseError("bad shape in checkpoint for " + name);
      count *= d;
    }
    if (offset + static_cast<std::size_t>(count) * 4 > blob.size())
      throw ParseError("checkpoint blob too short for " + name);
    Tensor t = Tensor::zeros(shape);
    double* d = t.data().data();
    for (std::int64_t k = 0; k < count; ++k)
      d[k] = static_cast<double>(get_f32_le(blob.data() + offset + 4 * k));
    if (ckpt.params.count(name)) throw ParseError("duplicate checkpoint parameter: " + name);
    ckpt.params.emplace(name, std::move(t));
  }
  return ckpt;
}

}  // namespace scriptor
