// Acceptance gate: runs the full criterion suite at the shipped default
// configuration (horizons {10, 18}, 30000 replicas) and, separately, the
// thread-count determinism criterion through the CLI binary on a reduced
// configuration.  One PASS/FAIL line per criterion; exit 0 only if all pass.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "brw/harness.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BRWLAB_PATH) + " " + args;
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path find_run_dir(const fs::path& base) {
  for (const auto& e : fs::directory_iterator(base))
    if (e.is_directory() && e.path().filename().string().rfind("run-", 0) == 0)
      return e.path();
  return {};
}

// Criterion 11: three `checkall` runs of the CLI at 1, 4 and 8 threads on a
// reduced configuration must produce byte-identical run directories
// (manifest.json excluded: it records threads and timing) and equal exit
// codes.
bool determinism_criterion(const fs::path& base, std::string& detail) {
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) {
    detail = "cannot create " + base.string();
    return false;
  }
  const fs::path cfg_path = base / "reduced.json";
  {
    std::ofstream out(cfg_path);
    out << "{\"horizons\": [5, 7], \"replicas\": 400}\n";
    if (!out) {
      detail = "cannot write " + cfg_path.string();
      return false;
    }
  }

  std::vector<fs::path> runs;
  std::vector<int> codes;
  for (int threads : {1, 4, 8}) {
    const fs::path out_dir = base / ("threads_" + std::to_string(threads));
    const int rc = run_cli("checkall --config " + cfg_path.string() +
                           " --out " + out_dir.string() + " --threads " +
                           std::to_string(threads) + " > " +
                           (out_dir.string() + ".log") + " 2>&1");
    if (rc != 0 && rc != 3) {
      detail = "checkall at " + std::to_string(threads) +
               " threads exited " + std::to_string(rc);
      return false;
    }
    codes.push_back(rc);
    const auto run = find_run_dir(out_dir);
    if (run.empty()) {
      detail = "no run directory at " + std::to_string(threads) + " threads";
      return false;
    }
    runs.push_back(run);
  }
  if (codes[0] != codes[1] || codes[0] != codes[2]) {
    detail = "exit codes differ across thread counts";
    return false;
  }

  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(runs[0]))
    names.insert(e.path().filename().string());
  for (const auto& run : runs) {
    std::set<std::string> here;
    for (const auto& e : fs::directory_iterator(run))
      here.insert(e.path().filename().string());
    if (here != names) {
      detail = "file sets differ across thread counts";
      return false;
    }
  }

  int compared = 0;
  for (const auto& name : names) {
    if (name == "manifest.json") continue;
    const auto ref = slurp(runs[0] / name);
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (slurp(runs[i] / name) != ref) {
        detail = name + " differs between 1 and " +
                 std::to_string(i == 1 ? 4 : 8) + " threads";
        return false;
      }
    }
    ++compared;
  }
  detail = std::to_string(compared) +
           " files byte-identical across threads {1,4,8}, exit code " +
           std::to_string(codes[0]) + " at every count";
  return compared >= 4;
}

}  // namespace

int main() {
  const fs::path base = fs::temp_directory_path() / "brw_acceptance";
  std::error_code ec;
  fs::remove_all(base, ec);
  fs::create_directories(base);

  std::printf("acceptance gate: artifacts in %s\n", base.c_str());
  std::fflush(stdout);

  // Criterion 11 first: it is fast and independent of the long run.
  std::string c11_detail;
  const bool c11 = determinism_criterion(base / "determinism", c11_detail);
  std::printf("determinism phase done (%s): %s\n", c11 ? "pass" : "fail",
              c11_detail.c_str());
  std::fflush(stdout);

  // Criteria 1-10 at the shipped defaults.
  brw::ExperimentConfig cfg;
  std::printf("running criteria 1-10 at %llu replicas, horizons {%d, %d}\n",
              static_cast<unsigned long long>(cfg.replicas), cfg.horizons[0],
              cfg.horizons[1]);
  std::fflush(stdout);
  const auto res = brw::run_subcommand("checkall", cfg, 1,
                                       (base / "full").string());

  int passed = 0, total = 0;
  for (const auto& line : res.messages) {
    if (line.rfind("PASS ", 0) == 0 || line.rfind("FAIL ", 0) == 0) {
      ++total;
      if (line.rfind("PASS ", 0) == 0) ++passed;
      std::printf("%s\n", line.c_str());
    }
  }
  std::printf("%s 11: determinism: %s\n", c11 ? "PASS" : "FAIL",
              c11_detail.c_str());
  total += 1;
  passed += c11 ? 1 : 0;

  std::printf("ACCEPTANCE: %d/%d criteria passed\n", passed, total);
  std::printf("full-run artifacts: %s\n", res.run_dir.c_str());
  return passed == total ? 0 : 1;
}
