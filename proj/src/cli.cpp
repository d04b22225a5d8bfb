#include "blenderlab/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <future>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "blenderlab/jsonio.hpp"

namespace blender {

namespace {

// Output artifacts accumulate here and hit the filesystem once, at the end,
// so a crashed run never leaves half-written files.
struct OutFiles {
  std::string dir;
  std::vector<std::pair<std::string, std::string>> files;

  void add(const std::string& name, const std::string& text) {
    if (!dir.empty()) files.emplace_back(name, text);
  }
  std::string flush() {
    namespace fs = std::filesystem;
    for (const auto& [name, text] : files) {
      auto r = write_text_atomic((fs::path(dir) / name).string(), text);
      if (!r.ok()) return r.error().code + ": " + r.error().detail;
    }
    return {};
  }
};

int exit_for(const Error& e) {
  return (e.code == "PARSE" || e.code == "IO") ? 3 : 2;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

Expected<Model> load_model(const RunConfig& cfg) {
  const std::string& p = cfg.model_path;
  if (p.empty()) return Error{"PARSE", "no --model given"};
  if (p.rfind("builtin:", 0) == 0) {
    std::string name = p.substr(8);
    if (name == "horseshoe") return builtin_horseshoe();
    if (name == "affine3") return builtin_affine3();
    if (name == "toy-affine") return builtin_toy_affine();
    if (name == "nabs-dyadic") return builtin_nabs_dyadic(cfg.k);
    if (name == "nabs-saddlefocus") return builtin_nabs_saddlefocus(cfg.k);
    return Error{"PARSE", "unknown builtin model '" + name + "'"};
  }
  return read_model_file(p);
}

void print_bundle(const CertBundle& b, std::ostream& out) {
  for (const auto& c : b.certs)
    out << c.property << ' ' << (c.pass ? "PASS" : "FAIL")
        << (c.note.empty() ? "" : " (" + c.note + ")") << '\n';
  for (const auto& c : b.construction)
    out << c.property << ' ' << (c.pass ? "PASS" : "FAIL")
        << (c.note.empty() ? "" : " (" + c.note + ")") << '\n';
}

int cmd_verify(const RunConfig& cfg, OutFiles& files, std::ostream& out,
               std::ostream& err) {
  auto model = load_model(cfg);
  if (!model.ok()) {
    err << model.error().code << ": " << model.error().detail << '\n';
    return exit_for(model.error());
  }
  CertBundle b = certify_model(*model, cfg.full);
  files.add("certificates.json", dump(bundle_json(model->name, b)));
  if (b.failure)
    err << b.failure->code << ": " << b.failure->detail << '\n';
  print_bundle(b, out);
  return b.all_pass ? 0 : 2;
}

double iterated_alpha(double alpha, int n) {
  double a = 1.0;
  for (int i = 0; i < n; ++i) a *= alpha;
  return a;
}

int cmd_plan(const RunConfig& cfg, OutFiles& files, std::ostream& out,
             std::ostream& err) {
  if (cfg.alpha <= 0.0) {
    err << "PARSE: plan requires --alpha\n";
    return 3;
  }
  auto plan = plan_grid(iterated_alpha(cfg.alpha, cfg.iterate), cfg.x_B, cfg.k);
  if (!plan.ok()) {
    err << plan.error().code << ": " << plan.error().detail << '\n';
    return 2;
  }
  GridPlan p = *plan;
  p.shift_copies = cfg.shifts;
  files.add("plan.json", dump(plan_json(p)));
  out << "N = " << p.N << ", m = " << p.m << ", x_C = " << p.x_C
      << ", delta_cap = " << p.delta_cap << '\n';
  return 0;
}

struct Built {
  GridPlan plan;
  SpecificationPair spec;
  std::string source;
  std::unique_ptr<Model> model;
};

Expected<Built> build_spec(const RunConfig& cfg) {
  if (cfg.model_path.rfind("builtin:nabs", 0) == 0) {
    auto model = load_model(cfg);
    if (!model.ok()) return model.error();
    if (!model->meta)
      return Error{"PARSE", "model carries no specification metadata"};
    Built b{model->meta->plan, model->meta->spec, model->meta->source,
            std::make_unique<Model>(*model)};
    return b;
  }
  if (cfg.alpha <= 0.0)
    return Error{"PARSE",
                 "build requires --alpha or a builtin specification model"};
  DyadicSource base(cfg.alpha);
  IteratedSource iterated(base, cfg.iterate);
  const CoefficientSource* src =
      cfg.iterate > 1 ? static_cast<const CoefficientSource*>(&iterated)
                      : &base;
  auto plan = plan_grid(src->alpha(), cfg.x_B, cfg.k);
  if (!plan.ok()) return plan.error();
  GridPlan p = *plan;
  p.shift_copies = cfg.shifts;
  auto spec = select_indices(*src, p);
  if (!spec.ok()) return spec.error();
  auto model = build_markov(p, *spec, src->name());
  if (!model.ok()) return model.error();
  Built b{p, *spec, src->name(), std::make_unique<Model>(*model)};
  return b;
}

int cmd_build(const RunConfig& cfg, OutFiles& files, std::ostream& out,
              std::ostream& err) {
  auto b = build_spec(cfg);
  if (!b.ok()) {
    err << b.error().code << ": " << b.error().detail << '\n';
    return exit_for(b.error());
  }
  SpecMeta meta{b->plan, b->spec, b->source};
  files.add("plan.json", dump(plan_json(b->plan)));
  files.add("spec.json", dump(spec_json(meta)));
  out << "specification: " << b->spec.roles.size() << " roles, delta = "
      << b->spec.delta << ", delta_tilde = " << b->spec.delta_tilde << '\n';
  return 0;
}

int cmd_certify(const RunConfig& cfg, OutFiles& files, std::ostream& out,
                std::ostream& err) {
  Expected<Built> b = [&]() -> Expected<Built> {
    if (!cfg.spec_path.empty()) {
      auto meta = read_spec_file(cfg.spec_path);
      if (!meta.ok()) return meta.error();
      auto model = build_markov(meta->plan, meta->spec, meta->source);
      if (!model.ok()) return model.error();
      Built out{meta->plan, meta->spec, meta->source,
                std::make_unique<Model>(*model)};
      return out;
    }
    return build_spec(cfg);
  }();
  if (!b.ok()) {
    err << b.error().code << ": " << b.error().detail << '\n';
    return exit_for(b.error());
  }
  CertBundle bundle = certify_model(*b->model, cfg.full);
  SpecMeta meta{b->plan, b->spec, b->source};
  files.add("plan.json", dump(plan_json(b->plan)));
  files.add("spec.json", dump(spec_json(meta)));
  files.add("certificates.json", dump(bundle_json(b->model->name, bundle)));
  if (bundle.failure)
    err << bundle.failure->code << ": " << bundle.failure->detail << '\n';
  print_bundle(bundle, out);
  return bundle.all_pass ? 0 : 2;
}

// A loaded model with its verified context; the shared precondition of the
// engine commands.
struct Gated {
  std::unique_ptr<Model> model;
  CoverContext cx;
  CertBundle bundle;
};

Expected<Gated> gate(const RunConfig& cfg, const char* required) {
  auto loaded = load_model(cfg);
  if (!loaded.ok()) return loaded.error();
  Gated g;
  g.model = std::make_unique<Model>(*loaded);
  auto cx = make_cover_context(*g.model);
  if (!cx.ok()) return cx.error();
  g.cx = *cx;
  g.bundle = certify_model(*g.model, cfg.full);
  if (g.bundle.failure) return *g.bundle.failure;
  if (!g.bundle.all_pass)
    return Error{"PRECONDITION", "model certificates FAIL"};
  if (required) {
    const Certificate* found = nullptr;
    for (const auto& c : g.bundle.certs)
      if (c.property == required) found = &c;
    if (!found) {
      g.bundle.certs.push_back(check_property(g.cx, required));
      found = &g.bundle.certs.back();
    }
    if (!found->pass)
      return Error{"PRECONDITION",
                   std::string("'") + required + "' certificate FAIL"};
  }
  return g;
}

ojson error_json(const Error& e) {
  ojson j;
  ojson ej;
  ej["code"] = e.code;
  ej["detail"] = e.detail;
  j["error"] = ej;
  return j;
}

int cmd_intersect(const RunConfig& cfg, OutFiles& files, std::ostream& out,
                  std::ostream& err) {
  auto g = gate(cfg, "A1");
  if (!g.ok()) {
    err << g.error().code << ": " << g.error().detail << '\n';
    return exit_for(g.error());
  }
  const Model& model = *g->model;
  files.add("certificates.json", dump(bundle_json(model.name, g->bundle)));
  if (cfg.element < 0 ||
      cfg.element >= static_cast<int>(model.elements.size())) {
    err << "PARSE: --element out of range\n";
    return 3;
  }
  const BoxXYZ& box = model.elements[cfg.element];
  SsDisc disc;
  disc.element = cfg.element;
  disc.x0 = cfg.disc_x;
  disc.x_slope.assign(model.dss, 0.0);
  for (const auto& yi : box.y) disc.y0.push_back(yi.mid());
  disc.y_slope.assign(model.du, std::vector<double>(model.dss, 0.0));

  std::vector<TraceRow> rows;
  auto r = find_unstable_intersection(g->cx, disc, cfg.tol, cfg.max_depth,
                                      WindowMode::Base, 0, &rows);
  files.add("trace.csv", trace_csv(rows));
  if (!r.ok()) {
    files.add("result.json", dump(error_json(r.error())));
    err << r.error().code << ": " << r.error().detail << '\n';
    return 2;
  }
  files.add("result.json", dump(intersection_json(*r)));
  out << "coding (";
  for (size_t i = 0; i < r->coding.symbols.size(); ++i)
    out << (i ? "," : "") << r->coding.symbols[i];
  out << "), depth " << r->depth << ", residual " << r->residual << '\n';
  return 0;
}

int cmd_tangency(const RunConfig& cfg, OutFiles& files, std::ostream& out,
                 std::ostream& err) {
  auto g = gate(cfg, "SEPARATED");
  if (!g.ok()) {
    err << g.error().code << ": " << g.error().detail << '\n';
    return exit_for(g.error());
  }
  files.add("certificates.json", dump(bundle_json(g->model->name, g->bundle)));
  auto fam = make_folding_family(g->cx);
  if (!fam.ok()) {
    err << fam.error().code << ": " << fam.error().detail << '\n';
    return 2;
  }
  std::vector<TraceRow> rows;
  auto r = locate_tangency(g->cx, *fam, cfg.tol, cfg.max_depth, 1e-10, &rows);
  files.add("trace.csv", trace_csv(rows));
  if (!r.ok()) {
    files.add("result.json", dump(error_json(r.error())));
    err << r.error().code << ": " << r.error().detail << '\n';
    return 2;
  }
  files.add("result.json", dump(tangency_json(*r)));
  out << "tangency window [" << r->leaf.x_window.lo << ", "
      << r->leaf.x_window.hi << "], depth " << r->depth << ", margin "
      << r->tangent_margin << '\n';
  return 0;
}

std::vector<Coding> slot_prefixes(int arity, int depth) {
  std::vector<Coding> out;
  std::vector<int> word(depth, 1);
  for (;;) {
    out.push_back(Coding{CodingKind::ArraySlot, word});
    int i = depth - 1;
    while (i >= 0 && word[i] == arity) {
      word[i] = 1;
      --i;
    }
    if (i < 0) break;
    ++word[i];
  }
  return out;
}

int cmd_array(const RunConfig& cfg, OutFiles& files, std::ostream& out,
              std::ostream& err) {
  auto g = gate(cfg, "ARRAYED");
  if (!g.ok()) {
    err << g.error().code << ": " << g.error().detail << '\n';
    return exit_for(g.error());
  }
  const Model& model = *g->model;
  files.add("certificates.json", dump(bundle_json(model.name, g->bundle)));
  if (model.arrays.empty()) {
    err << "PRECONDITION: model has no arrays\n";
    return 2;
  }
  int arity = static_cast<int>(model.arrays.front().maps.size());
  if (cfg.depth < 1 || cfg.depth > 16) {
    err << "PARSE: --depth must be in [1, 16]\n";
    return 3;
  }
  auto fam = make_exact_array_family(g->cx);
  if (!fam.ok()) {
    err << fam.error().code << ": " << fam.error().detail << '\n';
    return 2;
  }
  std::vector<Coding> prefixes = slot_prefixes(arity, cfg.depth);

  std::vector<Expected<LeafBox>> results;
  results.reserve(prefixes.size());
  int cap = thread_cap();
  if (cap <= 1 || prefixes.size() < 2) {
    for (const auto& p : prefixes)
      results.push_back(coding_to_tangency(g->cx, *fam, p, cfg.tol));
  } else {
    for (size_t base = 0; base < prefixes.size();
         base += static_cast<size_t>(cap)) {
      size_t stop = std::min(prefixes.size(), base + static_cast<size_t>(cap));
      std::vector<std::future<Expected<LeafBox>>> batch;
      for (size_t i = base; i < stop; ++i)
        batch.push_back(std::async(std::launch::async, [&, i] {
          return coding_to_tangency(g->cx, *fam, prefixes[i], cfg.tol);
        }));
      for (auto& f : batch) results.push_back(f.get());
    }
  }

  std::vector<TraceRow> rows;
  ojson boxes = ojson::array();
  std::vector<LeafBox> kept;
  for (size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) {
      err << results[i].error().code << ": " << results[i].error().detail
          << '\n';
      files.add("trace.csv", trace_csv(rows));
      files.add("result.json", dump(error_json(results[i].error())));
      return 2;
    }
    const LeafBox& b = *results[i];
    kept.push_back(b);
    boxes.push_back(leaf_box_json(b));
    TraceRow r;
    r.step = static_cast<int>(i);
    r.element = b.element;
    r.strip = b.coding_prefix.symbols.empty() ? 0 : b.coding_prefix.symbols[0];
    r.x = b.x_window;
    r.kind = "box";
    rows.push_back(r);
  }
  bool disjoint = true;
  for (size_t i = 0; i < kept.size() && disjoint; ++i)
    for (size_t j = i + 1; j < kept.size() && disjoint; ++j)
      if (kept[i].element == kept[j].element &&
          kept[i].x_window.intersects(kept[j].x_window))
        disjoint = false;
  ojson res;
  res["count"] = static_cast<int>(kept.size());
  res["depth"] = cfg.depth;
  res["disjoint"] = disjoint;
  res["boxes"] = boxes;
  files.add("trace.csv", trace_csv(rows));
  files.add("result.json", dump(res));
  out << kept.size() << (disjoint ? " disjoint" : " OVERLAPPING")
      << " leaf boxes at depth " << cfg.depth << '\n';
  return disjoint ? 0 : 2;
}

int cmd_prefold(const RunConfig& cfg, OutFiles& files, std::ostream& out,
                std::ostream& err) {
  auto g = gate(cfg, nullptr);
  if (!g.ok()) {
    err << g.error().code << ": " << g.error().detail << '\n';
    return exit_for(g.error());
  }
  files.add("certificates.json", dump(bundle_json(g->model->name, g->bundle)));
  PrefoldScenario sc;
  if (cfg.scenario == "right") {
    sc = PrefoldScenario::RightCase;
  } else if (cfg.scenario == "left") {
    sc = PrefoldScenario::LeftCase;
  } else {
    err << "PARSE: --scenario must be right or left\n";
    return 3;
  }
  auto limit = prefold_mu_limit(g->cx, cfg.period);
  if (!limit.ok()) {
    err << limit.error().code << ": " << limit.error().detail << '\n';
    return 2;
  }
  double mu = cfg.mu >= 0.0 ? cfg.mu : 0.3 * *limit;
  auto fam = make_prefolding(g->cx, sc, cfg.period, mu);
  if (!fam.ok()) {
    ojson res = error_json(fam.error());
    res["mu"] = mu;
    res["mu_limit"] = *limit;
    files.add("result.json", dump(res));
    err << fam.error().code << ": " << fam.error().detail << '\n';
    return 2;
  }
  PrefoldCheck check = check_prefolding(g->cx, *fam);
  ojson res;
  res["scenario"] = cfg.scenario;
  res["period"] = cfg.period;
  res["mu"] = mu;
  res["mu_limit"] = *limit;
  res["check"] = prefold_check_json(check);
  files.add("result.json", dump(res));
  out << "prefolding " << (check.pass ? "PASS" : "FAIL")
      << " (marker residual " << check.marker_residual << ", gap margin "
      << check.gap_margin << ", centre reach " << check.center_reach << ")\n";
  return check.pass ? 0 : 2;
}

}  // namespace

int thread_cap() {
  unsigned hw = std::thread::hardware_concurrency();
  int cap = hw ? static_cast<int>(hw) : 1;
  if (const char* s = std::getenv("BLENDER_LAB_THREADS")) {
    int v = std::atoi(s);
    if (v >= 1 && v < cap) cap = v;
  }
  return cap;
}

int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  OutFiles files;
  files.dir = cfg.out_dir;
  int code;
  if (cfg.command == "verify") {
    code = cmd_verify(cfg, files, out, err);
  } else if (cfg.command == "plan") {
    code = cmd_plan(cfg, files, out, err);
  } else if (cfg.command == "build") {
    code = cmd_build(cfg, files, out, err);
  } else if (cfg.command == "certify") {
    code = cmd_certify(cfg, files, out, err);
  } else if (cfg.command == "intersect") {
    code = cmd_intersect(cfg, files, out, err);
  } else if (cfg.command == "tangency") {
    code = cmd_tangency(cfg, files, out, err);
  } else if (cfg.command == "array") {
    code = cmd_array(cfg, files, out, err);
  } else if (cfg.command == "prefold") {
    code = cmd_prefold(cfg, files, out, err);
  } else {
    err << "PARSE: unknown command '" << cfg.command << "'\n";
    return 3;
  }
  std::string io = files.flush();
  if (!io.empty()) {
    err << io << '\n';
    if (code == 0) code = 3;
  }
  return code;
}

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"certified cross-form blender laboratory"};
  app.require_subcommand(1);

  CLI::Option* disc_opt = nullptr;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--model", cfg.model_path,
                  "builtin:<name> or a model JSON file");
    s->add_option("--out-dir", cfg.out_dir, "artifact directory");
    s->add_option("--tol", cfg.tol, "refinement tolerance")
        ->check(CLI::PositiveNumber);
    s->add_option("--max-depth", cfg.max_depth, "refinement step cap")
        ->check(CLI::Range(1, 1000000));
    s->add_option("--seed", cfg.seed, "sampling seed");
    s->add_option("--k", cfg.k, "array multiplicity")
        ->check(CLI::Range(1, 64));
    s->add_flag("--full", cfg.full, "certify every supported property");
  };
  auto add_plan = [&](CLI::App* s) {
    s->add_option("--alpha", cfg.alpha, "centre contraction rate")
        ->check(CLI::PositiveNumber);
    s->add_option("--xb", cfg.x_B, "base half-width")
        ->check(CLI::PositiveNumber);
    s->add_option("--iterate", cfg.iterate, "compose the family n-fold")
        ->check(CLI::Range(1, 64));
    s->add_option("--shifts", cfg.shifts, "ladder copies (1 or 3)")
        ->check(CLI::Range(1, 3));
  };

  add_common(app.add_subcommand("verify", "hyperbolicity and covering"));
  auto* plan = app.add_subcommand("plan", "grid arithmetic");
  add_common(plan);
  add_plan(plan);
  auto* build = app.add_subcommand("build", "select a specification");
  add_common(build);
  add_plan(build);
  auto* certify = app.add_subcommand("certify", "build and certify");
  add_common(certify);
  add_plan(certify);
  certify->add_option("--spec", cfg.spec_path, "existing specification JSON");
  auto* intersect =
      app.add_subcommand("intersect", "drive a disc onto the lamination");
  add_common(intersect);
  disc_opt = intersect->add_option("--disc-x", cfg.disc_x,
                                   "disc centre x position");
  intersect->add_option("--element", cfg.element, "disc element index");
  add_common(app.add_subcommand("tangency", "locate a fold tangency"));
  auto* array = app.add_subcommand("array", "enumerate coding boxes");
  add_common(array);
  array->add_option("--depth", cfg.depth, "prefix depth");
  auto* prefold = app.add_subcommand("prefold", "build a prefolding family");
  add_common(prefold);
  prefold->add_option("--scenario", cfg.scenario, "right or left");
  prefold->add_option("--mu", cfg.mu, "unfolding displacement");
  prefold->add_option("--period", cfg.period, "gap transport steps")
      ->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "PARSE: " << e.what() << '\n';
    return 3;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  cfg.has_disc_x = disc_opt && disc_opt->count() > 0;
  return run_command(cfg, out, err);
}

}  // namespace blender
