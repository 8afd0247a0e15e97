#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medtest/effects.hpp"
#include "medtest/harness.hpp"
#include "medtest/idtest.hpp"
#include "medtest/theorems.hpp"

// Line-delimited JSON records: one object per line, tagged by a "record"
// field. Every writer has a matching parser so output can be read back.
namespace medtest::records {

using Json = nlohmann::ordered_json;

Json to_record(const theorems::VerificationReport& report);
Json to_record(const idtest::TestResult& result);
Json to_record(const idtest::FirstStageResult& result);
Json to_record(const effects::EffectEstimates& estimates);
Json to_record(const effects::DynamicEffect& effect);
Json to_record(const harness::ReplicationRecord& rec);
Json to_record(const harness::SimulationRow& row);
/// Checkpoint header: the cell coordinates that determine every replication.
Json to_record(const harness::CellConfig& cell);

theorems::VerificationReport parse_verification_report(const Json& j);
idtest::TestResult parse_test_result(const Json& j);
idtest::FirstStageResult parse_first_stage(const Json& j);
effects::EffectEstimates parse_effects(const Json& j);
effects::DynamicEffect parse_dynamic_effect(const Json& j);
harness::ReplicationRecord parse_replication(const Json& j);
harness::SimulationRow parse_simulation_row(const Json& j);
harness::CellConfig parse_cell(const Json& j);

/// The "record" tag of `j`; throws data_error when absent.
std::string kind(const Json& j);

/// Compact single-line form.
std::string dump(const Json& j);
void write_line(std::ostream& out, const Json& j);

/// Parses every non-blank line; errors name the source and line number.
std::vector<Json> parse_lines(std::string_view text, std::string_view source = "<records>");

}  // namespace medtest::records
