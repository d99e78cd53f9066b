#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mjls/acc.hpp"
#include "mjls/model.hpp"
#include "mjls/simulate.hpp"
#include "mjls/synthesis.hpp"

namespace mjls {

// Parse/validation error carrying a JSON-pointer-style location.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// The single JSON config document shared by all commands. Every
// section is optional; commands check for what they need.
struct ConfigDocument {
  std::optional<PemAdm> model;
  std::optional<GainSet> gains;
  std::optional<SynthesisOptions> synthesis;
  std::optional<SimConfig> sim;
  std::optional<std::vector<double>> x0;

  struct Scenario {
    int id = 1;
    AccConfig acc;
    BaselineParams baseline;
    Generator design_generator{2, Matrix({{-4.0, 4.0}, {0.5, -0.5}})};
    double failure_threshold = 15.0;
    int n_retain = 3;
  };
  std::optional<Scenario> scenario;
};

// Throws ConfigError on malformed JSON, unknown keys (with location),
// wrong types, or dimension mismatches. A top-level "config" key marks
// a run manifest; its subobject is parsed and the manifest metadata is
// ignored.
ConfigDocument parse_config(const std::string& text, const std::string& source_name = "<config>");
ConfigDocument load_config(const std::string& path);

// Canonical serialization; parse(serialize(d)) == d field-for-field.
std::string serialize_config(const ConfigDocument& doc);

// One CSV column per entry; all columns must share a length. Values
// are written with 17 significant digits so doubles round-trip.
struct CsvColumn {
  std::string name;
  std::vector<double> values;
};

std::string to_csv(const std::vector<CsvColumn>& columns);
void write_file(const std::string& path, const std::string& content);  // throws on I/O failure
std::string read_file(const std::string& path);

}  // namespace mjls
