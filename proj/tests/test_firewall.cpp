#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

// The learners may only see the Environment interface and LearnerKnowledge.
// Scan their sources for anything that would give them the plant matrix or
// the human's gains.

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE_MESSAGE(in.good(), "cannot open " << p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops // and /* */ comments so prose does not trip the scan.
std::string stripComments(const std::string& s) {
  static const std::regex line("//[^\n]*");
  static const std::regex block("/\\*[\\s\\S]*?\\*/");
  return std::regex_replace(std::regex_replace(s, block, ""), line, "");
}

}  // namespace

TEST_SUITE("firewall") {

TEST_CASE("learner sources do not reach the plant or the human") {
  const std::filesystem::path root = SLQR_SOURCE_DIR;
  const std::vector<std::string> files = {
      "include/slqr/onpolicy.hpp", "src/onpolicy.cpp",     "include/slqr/offpolicy.hpp",
      "src/offpolicy.cpp",         "include/slqr/regression.hpp", "src/regression.cpp",
      "include/slqr/environment.hpp", "include/slqr/segment.hpp"};
  const std::vector<std::string> forbidden = {"simulation.hpp", "orchestrator.hpp", "analysis.hpp",
                                              "LtiPlant", "HumanPolicy", "SharedLoopSimulator",
                                              "SharedScenario", "effectiveGain", "\\bKh\\b",
                                              "\\bCh\\b", "\\.A\\b", "plant"};
  for (const auto& f : files) {
    const std::string text = stripComments(slurp(root / f));
    for (const auto& pat : forbidden) {
      const bool hit = std::regex_search(text, std::regex(pat));
      CHECK_MESSAGE(!hit, f << " references " << pat);
    }
  }
}

}  // TEST_SUITE
