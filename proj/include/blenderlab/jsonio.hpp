#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "blenderlab/covering.hpp"
#include "blenderlab/crossmap.hpp"
#include "blenderlab/dynamics.hpp"
#include "blenderlab/expected.hpp"
#include "blenderlab/nabs.hpp"

namespace blender {

// Insertion-ordered JSON so emitted key order is part of the contract.
using ojson = nlohmann::ordered_json;

// --- emitters -------------------------------------------------------------
// All emitters are pure and deterministic: the same value yields the same
// byte sequence under dump().

ojson interval_json(const Interval& v);
ojson point_json(const Point3& p);
ojson certificate_json(const Certificate& c);
// Whole verification outcome for one model (certificates.json payload).
ojson bundle_json(const std::string& model_name, const CertBundle& b);
ojson plan_json(const GridPlan& p);
// Specification payload; carries everything needed to rebuild the model.
ojson spec_json(const SpecMeta& meta);
ojson model_json(const Model& m);
ojson intersection_json(const IntersectionResult& r);
ojson leaf_box_json(const LeafBox& b);
ojson tangency_json(const TangencyResult& r);
ojson prefold_check_json(const PrefoldCheck& c);

// Engine trace with the fixed column set shared by every command.
std::string trace_csv(const std::vector<TraceRow>& rows);

// --- readers --------------------------------------------------------------
// Failures carry code PARSE and a detail prefixed "line N:" for syntax
// errors or naming the offending field for schema errors.

Expected<Model> model_from_json_text(const std::string& text);
Expected<Model> read_model_file(const std::string& path);

Expected<SpecMeta> spec_from_json_text(const std::string& text);
Expected<SpecMeta> read_spec_file(const std::string& path);

// --- files ----------------------------------------------------------------

// Writes via a temp file in the same directory plus rename, so readers never
// observe partial content; creates missing parent directories.
Expected<bool> write_text_atomic(const std::string& path,
                                 const std::string& text);

}  // namespace blender
