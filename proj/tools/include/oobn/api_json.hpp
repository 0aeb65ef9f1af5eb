#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "oobn/error.hpp"
#include "oobn/flatten.hpp"
#include "oobn/msbn.hpp"
#include "oobn/session.hpp"

// JSON shapes shared by the CLI and the HTTP service.
namespace oobn::api {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Probability as a decimal string with 12 significant digits.
std::string prob(double p);

json diagnostics_json(const std::vector<Diagnostic>& diags);
json error_json(const Error& e);

// {targets, variables, domains, rows: [{values, p}]}
json query_json(const QueryResult& r);
json cost_json(const CostReport& r);
json locality_json(const LocalityStats& s);
json evidence_json(const std::vector<EvidenceItem>& ev);

// Variables with domains, parents and row-major CPTs.
json bn_json(const FlatBN& bn);

json object_tree_json(const GroundModel& gm, const FlatBN& bn);
json hypertree_json(const Hypertree& ht);
json hierarchy_json(const std::vector<HierarchyEntry>& entries);

// Object tree, class hierarchy and hypertree of a ground model.
json structure_json(const GroundModel& gm, const FlatBN& bn, const Hypertree& ht,
                    const std::vector<HierarchyEntry>& hierarchy);
std::vector<HierarchyEntry> declared_hierarchy(const CompiledModel& model);

// Fixed-width text table for a query result (used by the CLI and REPL).
std::string query_table(const QueryResult& r);

}  // namespace oobn::api
