#pragma once

#include "klrf/learning.hpp"

#include <filesystem>

namespace klrf::io {

//============================================================================
// Datasets
//============================================================================

/// Dataset manifest: a JSON document next to its sequence files.
///
///   {
///     "name": "patient-view1",
///     "joint_count": 15,
///     "plane_labels": ["bed_top", "floor"],
///     "class_names": ["lying", "sitting"],
///     "appearance_dim": 4096,            // or null when sequences carry depth frames
///     "sequences": ["seq/0001.jsonl", ...] // relative to the manifest
///   }
struct DatasetManifest
{
    std::string name;
    std::size_t joint_count = 0;
    std::vector<std::string> plane_labels;
    std::vector<std::string> class_names;
    std::optional<std::size_t> appearance_dim;
    std::vector<std::string> sequence_files;
};

/// Distinct failure kinds of the loader.
class ParseError : public DataError
{
  public:
    using DataError::DataError;
};

class DimensionMismatchError : public DataError
{
  public:
    using DataError::DataError;
};

class UnknownClassError : public DataError
{
  public:
    using DataError::DataError;
};

DatasetManifest read_manifest(std::filesystem::path const & path);

/// Parses one sequence file (JSON lines: a header record, then one record per frame).
ActionSequence read_sequence(std::filesystem::path const & path);

/// Loads and validates every sequence referenced by the manifest.
std::vector<ActionSequence> load_dataset(std::filesystem::path const & manifest_path);

/// Writes `sequences` as <dir>/<manifest_name> plus one sequence file each under <dir>/sequences/.
/// Returns the manifest path.
std::filesystem::path save_dataset(std::filesystem::path const & dir, std::string const & manifest_name,
                                   std::string const & dataset_name, std::span<const ActionSequence> sequences,
                                   std::vector<std::string> class_names = {});

void write_sequence(std::filesystem::path const & path, ActionSequence const & sequence);

//============================================================================
// Models
//============================================================================

class ModelFormatError : public DataError
{
  public:
    using DataError::DataError;
};

class ChecksumError : public ModelFormatError
{
  public:
    using ModelFormatError::ModelFormatError;
};

class VersionMismatchError : public ModelFormatError
{
  public:
    using ModelFormatError::ModelFormatError;
};

inline constexpr std::uint32_t kModelVersion = 1;

/// Binary model image: 8-byte magic "KLRFMDL1", u32 version, u64 payload length, u32 CRC-32 of
/// the payload, payload. All integers little-endian; doubles stored as their IEEE-754 bits.
std::vector<std::uint8_t> serialize_model(learning::TrainedModel const & model, bool include_references = true);
learning::TrainedModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(learning::TrainedModel const & model, std::filesystem::path const & path,
                bool include_references = true);
learning::TrainedModel load_model(std::filesystem::path const & path);

/// CRC-32 of the payload, as stored in the header.
std::uint32_t model_checksum(std::span<const std::uint8_t> image);

//============================================================================
// Config files
//============================================================================

/// Reads a JSON config file; missing keys keep their defaults.
KLRFConfig read_config(std::filesystem::path const & path);
std::string config_to_json(KLRFConfig const & config, int indent = -1);
KLRFConfig config_from_json(std::string const & text);

} // namespace klrf::io
