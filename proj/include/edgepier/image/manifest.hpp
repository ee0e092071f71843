// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgepier/cas/block_store.hpp"
#include "edgepier/cas/content_id.hpp"

namespace edgepier::img {

inline constexpr std::string_view kManifestMediaType =
    "application/vnd.docker.distribution.manifest.v2+json";
inline constexpr std::string_view kConfigMediaType =
    "application/vnd.docker.container.image.v1+json";
inline constexpr std::string_view kLayerMediaType =
    "application/vnd.docker.image.rootfs.diff.tar.gzip";

class ManifestParseError : public std::runtime_error {
 public:
  explicit ManifestParseError(const std::string& what) : std::runtime_error(what) {}
};

class UnsupportedSchemaError : public ManifestParseError {
 public:
  explicit UnsupportedSchemaError(const std::string& what) : ManifestParseError(what) {}
};

struct LayerDescriptor {
  std::string media_type;
  cas::ContentId digest;
  std::uint64_t size = 0;

  bool operator==(const LayerDescriptor&) const = default;
};

// Registry "manifest v2 schema 2" document. canonical_bytes is the identity:
// UTF-8 JSON with lexicographically sorted keys and no insignificant
// whitespace, so independent builds of the same content agree byte for byte.
struct ImageManifest {
  int schema_version = 2;
  std::string media_type{kManifestMediaType};
  LayerDescriptor config;
  std::vector<LayerDescriptor> layers;
  std::string canonical_bytes;

  cas::ContentId digest() const;
  std::uint64_t layers_total_size() const;

  static std::string canonicalize(int schema_version, const std::string& media_type,
                                  const LayerDescriptor& config,
                                  const std::vector<LayerDescriptor>& layers);
  // Strict parse; throws ManifestParseError / UnsupportedSchemaError.
  static ImageManifest parse(std::string_view bytes);
};

// Repository reference: name plus tag or digest.
struct ImageRef {
  std::string name;
  std::string reference;

  bool reference_is_digest() const { return reference.rfind("sha256:", 0) == 0; }
  static bool valid_name(std::string_view name);
  static bool valid_tag(std::string_view tag);
  // "repo/name:tag" -> ref; nullopt when either side is invalid
  static std::optional<ImageRef> parse_name_tag(std::string_view spec);
};

struct BuiltImage {
  ImageManifest manifest;
  cas::ChunkResult manifest_file;
  cas::ChunkResult config_file;
  std::vector<cas::ChunkResult> layer_files;
};

// Chunks every layer and the config into the store, assembles the manifest,
// and stores its canonical bytes as a file of their own.
BuiltImage build_image(cas::BlockStore& store,
                       const std::vector<std::span<const std::uint8_t>>& layer_blobs,
                       std::span<const std::uint8_t> config_blob);

// Layer digests whose DAGs are not fully present, in manifest order.
std::vector<cas::ContentId> missing_layers(const ImageManifest& manifest,
                                           const cas::BlockStore& store);

// Same, plus the config digest appended when that blob is incomplete.
std::vector<cas::ContentId> missing_blobs(const ImageManifest& manifest,
                                          const cas::BlockStore& store);

}  // namespace edgepier::img
