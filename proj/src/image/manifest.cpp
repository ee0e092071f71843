// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/image/manifest.hpp"

#include <json.hpp>
#include <regex>

#include "edgepier/cas/sha256.hpp"

namespace edgepier::img {

using nlohmann::json;

cas::ContentId ImageManifest::digest() const { return cas::sha256(canonical_bytes); }

std::uint64_t ImageManifest::layers_total_size() const {
  std::uint64_t sum = 0;
  for (const auto& l : layers) sum += l.size;
  return sum;
}

namespace {

json descriptor_json(const LayerDescriptor& d) {
  // json object keys sort lexicographically: digest, mediaType, size
  json j;
  j["digest"] = d.digest.to_string();
  j["mediaType"] = d.media_type;
  j["size"] = d.size;
  return j;
}

LayerDescriptor descriptor_from_json(const json& j, const char* where) {
  if (!j.is_object()) throw ManifestParseError(std::string(where) + ": not an object");
  for (const char* key : {"digest", "mediaType", "size"})
    if (!j.contains(key))
      throw ManifestParseError(std::string(where) + ": missing field '" + key + "'");
  LayerDescriptor d;
  if (!j["digest"].is_string())
    throw ManifestParseError(std::string(where) + ": digest is not a string");
  auto digest = cas::ContentId::parse(j["digest"].get<std::string>());
  if (!digest) throw ManifestParseError(std::string(where) + ": malformed digest");
  d.digest = *digest;
  if (!j["mediaType"].is_string())
    throw ManifestParseError(std::string(where) + ": mediaType is not a string");
  d.media_type = j["mediaType"].get<std::string>();
  if (!j["size"].is_number_unsigned() && !j["size"].is_number_integer())
    throw ManifestParseError(std::string(where) + ": size is not an integer");
  auto size = j["size"].get<std::int64_t>();
  if (size < 0) throw ManifestParseError(std::string(where) + ": negative size");
  d.size = static_cast<std::uint64_t>(size);
  return d;
}

}  // namespace

std::string ImageManifest::canonicalize(int schema_version, const std::string& media_type,
                                        const LayerDescriptor& config,
                                        const std::vector<LayerDescriptor>& layers) {
  json j;
  j["schemaVersion"] = schema_version;
  j["mediaType"] = media_type;
  j["config"] = descriptor_json(config);
  json arr = json::array();
  for (const auto& l : layers) arr.push_back(descriptor_json(l));
  j["layers"] = arr;
  return j.dump();  // nlohmann keeps keys sorted and emits no whitespace
}

ImageManifest ImageManifest::parse(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ManifestParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ManifestParseError("manifest is not a JSON object");
  if (!j.contains("schemaVersion") || !j["schemaVersion"].is_number_integer())
    throw ManifestParseError("missing schemaVersion");
  int version = j["schemaVersion"].get<int>();
  if (version != 2)
    throw UnsupportedSchemaError("unsupported schemaVersion " + std::to_string(version));
  for (const char* key : {"mediaType", "config", "layers"})
    if (!j.contains(key)) throw ManifestParseError(std::string("missing field '") + key + "'");
  if (!j["mediaType"].is_string()) throw ManifestParseError("mediaType is not a string");
  if (!j["layers"].is_array()) throw ManifestParseError("layers is not an array");

  ImageManifest m;
  m.schema_version = version;
  m.media_type = j["mediaType"].get<std::string>();
  m.config = descriptor_from_json(j["config"], "config");
  for (const auto& l : j["layers"]) m.layers.push_back(descriptor_from_json(l, "layer"));
  m.canonical_bytes = canonicalize(m.schema_version, m.media_type, m.config, m.layers);
  return m;
}

bool ImageRef::valid_name(std::string_view name) {
  static const std::regex re("[a-z0-9]+(?:[._/-][a-z0-9]+)*");
  return std::regex_match(name.begin(), name.end(), re);
}

bool ImageRef::valid_tag(std::string_view tag) {
  static const std::regex re("[A-Za-z0-9_][A-Za-z0-9._-]{0,127}");
  return std::regex_match(tag.begin(), tag.end(), re);
}

std::optional<ImageRef> ImageRef::parse_name_tag(std::string_view spec) {
  auto colon = spec.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 >= spec.size())
    return std::nullopt;
  ImageRef ref{std::string(spec.substr(0, colon)), std::string(spec.substr(colon + 1))};
  if (!valid_name(ref.name) || !valid_tag(ref.reference)) return std::nullopt;
  return ref;
}

BuiltImage build_image(cas::BlockStore& store,
                       const std::vector<std::span<const std::uint8_t>>& layer_blobs,
                       std::span<const std::uint8_t> config_blob) {
  if (layer_blobs.empty()) throw std::invalid_argument("build_image: at least one layer required");
  BuiltImage out;
  out.config_file = store.chunk_blob(config_blob);
  out.manifest.config = LayerDescriptor{std::string(kConfigMediaType),
                                        out.config_file.file_digest, config_blob.size()};
  for (const auto& blob : layer_blobs) {
    auto chunked = store.chunk_blob(blob);
    out.manifest.layers.push_back(
        LayerDescriptor{std::string(kLayerMediaType), chunked.file_digest, blob.size()});
    out.layer_files.push_back(chunked);
  }
  out.manifest.canonical_bytes =
      ImageManifest::canonicalize(out.manifest.schema_version, out.manifest.media_type,
                                  out.manifest.config, out.manifest.layers);
  const auto* data = reinterpret_cast<const std::uint8_t*>(out.manifest.canonical_bytes.data());
  out.manifest_file = store.chunk_blob({data, out.manifest.canonical_bytes.size()});
  return out;
}

std::vector<cas::ContentId> missing_layers(const ImageManifest& manifest,
                                           const cas::BlockStore& store) {
  std::vector<cas::ContentId> missing;
  for (const auto& layer : manifest.layers)
    if (!store.file_complete(layer.digest)) missing.push_back(layer.digest);
  return missing;
}

std::vector<cas::ContentId> missing_blobs(const ImageManifest& manifest,
                                          const cas::BlockStore& store) {
  auto missing = missing_layers(manifest, store);
  if (!store.file_complete(manifest.config.digest)) missing.push_back(manifest.config.digest);
  return missing;
}

}  // namespace edgepier::img
