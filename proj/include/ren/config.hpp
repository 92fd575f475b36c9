#pragma once

// Flat key=value run configuration and the JSON run manifest.
//
//   # comment
//   env = syn-s
//   lambda_d = 0.01
//
// Later sources override earlier ones: config file (or manifest), REN_SEED,
// command-line overrides.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ren/harness.hpp"

namespace ren {

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
/// Throws ParseError listing every malformed or duplicated line.
KeyValues parse_key_values(std::string_view text);

/// Reads and parses a config file; InvalidArgument when it cannot be read.
KeyValues load_key_values(const std::filesystem::path& path);

/// Keys understood by each subcommand.
const std::vector<std::string>& experiment_keys();
const std::vector<std::string>& keys_for(std::string_view subcommand);

/// Rejects keys outside `allowed`, listing all of them.
void check_known_keys(const KeyValues& kv, const std::vector<std::string>& allowed);

/// Builds an experiment config from `kv` (unspecified keys keep defaults).
/// Collects every conversion/validation problem into one InvalidArgument.
ExperimentConfig experiment_config_from(const KeyValues& kv);

/// Inverse of experiment_config_from; numbers in shortest round-trip form.
KeyValues to_key_values(const ExperimentConfig& config);

/// Canonical text form: sorted `key = value` lines.
std::string format_key_values(const KeyValues& kv);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Typed lookups used by the non-experiment subcommands. Each appends to
/// `errors` instead of throwing.
std::size_t get_size(const KeyValues& kv, const std::string& key, std::size_t fallback,
                     std::vector<std::string>& errors);
double get_double(const KeyValues& kv, const std::string& key, double fallback, std::vector<std::string>& errors);
std::vector<double> get_double_list(const KeyValues& kv, const std::string& key, std::vector<double> fallback,
                                    std::vector<std::string>& errors);
std::vector<std::size_t> get_size_list(const KeyValues& kv, const std::string& key, std::vector<std::size_t> fallback,
                                       std::vector<std::string>& errors);
bool get_bool(const KeyValues& kv, const std::string& key, bool fallback, std::vector<std::string>& errors);

/// SHA-1 of "blob <size>\0<bytes>", lowercase hex (same id git assigns).
std::string git_blob_sha1(std::string_view bytes);

/// Whole-file read; InvalidArgument on failure.
std::string read_file(const std::filesystem::path& path);

struct Manifest {
    std::string subcommand;
    KeyValues config;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, std::string> input_hashes;   // label -> git blob id
    std::map<std::string, std::string> output_hashes;  // file name -> git blob id
};

std::string manifest_json(const Manifest& manifest);
/// Throws ParseError for malformed manifests.
Manifest parse_manifest(std::string_view json_text);

}  // namespace ren
