#pragma once

// Shared plumbing for the test binaries: bundled-model loading and, for the
// end-to-end suites, running the CLI binary and picking values out of its
// output. SSPA_MODELS_DIR (and SSPA_BIN where needed) come from the build.

#include "sspa/syntax.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace testsupport {

inline std::string models_dir() { return SSPA_MODELS_DIR; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string model_path(const std::string& name) { return models_dir() + "/" + name; }

inline sspa::Model load_model(const std::string& name) {
  return sspa::parse_model(read_file(model_path(name)));
}

inline sspa::Model load_desugared(const std::string& name) {
  return sspa::desugar(load_model(name));
}

// The bundled models and the well-formedness mode each one documents in its
// header comment. `check` must exit 0 on every entry under its own mode.
struct BundledModel {
  const char* file;
  const char* mode; // "strict" or "lenient"
};

inline const std::vector<BundledModel>& bundled_models() {
  static const std::vector<BundledModel> models = {
      {"bio.sspa", "strict"},          {"bio_spoiled.sspa", "strict"},
      {"bio_doubled_trigger.sspa", "lenient"}, {"counterexample.sspa", "strict"},
      {"cycle.sspa", "lenient"},        {"independent.sspa", "strict"},
      {"passive_choice.sspa", "lenient"},
  };
  return models;
}

#ifdef SSPA_BIN

struct RunResult {
  int status = -1;
  std::string out;
};

// Run a shell command, capturing its output; the status is the decoded child
// exit code.
inline RunResult run_sh(const std::string& cmd) {
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed for: " + cmd);
  RunResult r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int rc = pclose(pipe);
  r.status = (rc >= 0 && ((rc & 0x7f) == 0)) ? ((rc >> 8) & 0xff) : -1;
  return r;
}

// Run the CLI with `args` appended, capturing stdout (+stderr unless told
// otherwise).
inline RunResult run_cli(const std::string& args, bool merge_stderr = true) {
  std::string cmd = std::string(SSPA_BIN) + " " + args;
  cmd += merge_stderr ? " 2>&1" : " 2>/dev/null";
  return run_sh(cmd);
}

// Pull the number following `"key": ` out of a JSON dump. Good enough for the
// flat keys the CLI emits; throws when the key is absent.
inline double json_number(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\": ";
  auto pos = text.find(needle);
  if (pos == std::string::npos) throw std::runtime_error("key '" + key + "' not in output");
  return std::stod(text.substr(pos + needle.size()));
}

inline bool json_bool(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\": ";
  auto pos = text.find(needle);
  if (pos == std::string::npos) throw std::runtime_error("key '" + key + "' not in output");
  return text.compare(pos + needle.size(), 4, "true") == 0;
}

#endif // SSPA_BIN

} // namespace testsupport
