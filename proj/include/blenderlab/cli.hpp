#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace blender {

// Parsed command line.  Defaults match the documented flag defaults; paths
// are used as given (no normalization).
struct RunConfig {
  std::string command;
  std::string model_path;  // "builtin:<name>" or a model JSON file
  std::string spec_path;   // existing specification JSON (certify)
  std::string out_dir;     // empty = no files written
  double tol = 1e-9;
  int max_depth = 200;
  std::uint64_t seed = 0;
  int k = 1;
  double alpha = 0.0;
  double x_B = 0.9;
  int iterate = 1;   // >1 composes the coefficient family n-fold
  int shifts = 3;    // ladder copies (3 = full construction)
  int element = 0;   // disc element for intersect
  double disc_x = 0.0;
  bool has_disc_x = false;
  int depth = 3;     // array prefix depth
  std::string scenario = "right";
  double mu = -1.0;  // right-case displacement; <0 picks 0.3 * limit
  int period = 2;    // gap-strip transport steps
  bool full = false; // certify every property, not only the claimed ones
};

// Executes one parsed command, writing artifacts under cfg.out_dir.
// Returns the process exit code: 0 success, 2 a check failed or an engine
// stopped early, 3 invalid input.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Full entry point: parses argv (argv[0] = program name) and dispatches.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

// Parallelism cap honoured by the prefix enumeration: hardware concurrency
// clamped by the BLENDER_LAB_THREADS environment variable.
int thread_cap();

}  // namespace blender
