#pragma once

#include "uwbsync/harness.hpp"

#include <iosfwd>
#include <map>
#include <string>

namespace uwbsync {

// Sectioned key-value text ([frame], [coarse], [fine], [channel],
// [experiment]). SI units. Unknown keys are rejected; a [run] section
// (written into manifests) is ignored on load.
ExperimentPlan parse_plan(std::istream& is);
ExperimentPlan load_plan(const std::string& path);

// Every field, with 17 significant digits, so parse_plan(write_plan(p)) == p.
void write_plan(std::ostream& os, const ExperimentPlan& plan);

// write_plan followed by a [run] section with the given entries.
void write_manifest(std::ostream& os, const ExperimentPlan& plan, const std::map<std::string, std::string>& run);

} // namespace uwbsync
