#pragma once

#include <string>

#include "fedscore/harness.hpp"

namespace fedscore {

// Parses and validates a JSON experiment config. Unknown keys, type
// mismatches and out-of-range values all throw std::invalid_argument naming
// the offending field by its dotted path. Client indices (attack.attacker,
// attack.target) are 1-based in the file and 0-based in the returned struct.
ExperimentConfig parse_config_text(const std::string& text);

ExperimentConfig load_config(const std::string& path);

// Canonical form: every field materialized (defaults included), keys sorted,
// indices back in their 1-based file convention. Two configs hash equal
// exactly when they mean the same experiment.
std::string canonical_config_text(const ExperimentConfig& cfg);

// 16 hex digits of FNV-1a over the canonical form.
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace fedscore
