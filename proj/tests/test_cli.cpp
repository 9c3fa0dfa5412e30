#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "intentctl_test";

int run(const std::string& args) {
  const std::string cmd = std::string(INTENTCTL) + " " + args + " 2>" + (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

std::string at(const char* name) { return (kDir / name).string(); }

}  // namespace

TEST_CASE("end-to-end command line workflow") {
  fs::remove_all(kDir);
  fs::create_directories(kDir);

  REQUIRE(run("simulate -n 120 --sample-rate 10 -o " + at("seqs.jsonl") + " --tracks " + at("tracks.jsonl") +
              " --truth " + at("truth.jsonl")) == 0);
  CHECK(lines(kDir / "seqs.jsonl") == 120);
  CHECK(lines(kDir / "tracks.jsonl") > 1000);
  CHECK(lines(kDir / "truth.jsonl") > 0);

  REQUIRE(run("label " + at("tracks.jsonl") + " -o " + at("relabeled.jsonl")) == 0);
  CHECK(lines(kDir / "relabeled.jsonl") >= 120);

  REQUIRE(run("train " + at("seqs.jsonl") + " --model mlp --features F5 --epochs 3 -o " + at("m.isns")) == 0);
  CHECK(fs::file_size(kDir / "m.isns") > 1000);

  REQUIRE(run("inspect-model " + at("m.isns") + " > " + at("inspect.json")) == 0);
  const auto info = nlohmann::json::parse(slurp(kDir / "inspect.json"));
  CHECK(info["kind"] == "mlp");
  CHECK(info["feature_set"] == "F5");
  CHECK(info["trainable_parameters"] == 1171);

  REQUIRE(run("eval " + at("seqs.jsonl") + " --model-file " + at("m.isns") + " --report " + at("report.json") +
              " --roc-csv " + at("roc.csv")) == 0);
  const auto report = nlohmann::json::parse(slurp(kDir / "report.json"));
  CHECK(report.contains("pooled_auroc"));
  CHECK(lines(kDir / "roc.csv") == 102);

  REQUIRE(run("eval " + at("seqs.jsonl") + " --model linear --features F3 -k 3 --report " + at("cv.json")) == 0);
  CHECK(nlohmann::json::parse(slurp(kDir / "cv.json"))["folds"] == 3);

  REQUIRE(run("ssl " + at("seqs.jsonl") + " --model linear --features F3 --days 3 --runs 2 --csv " +
              at("ssl.csv")) == 0);
  CHECK(lines(kDir / "ssl.csv") == 4);

  {
    std::ifstream in(kDir / "tracks.jsonl");
    std::ofstream out(kDir / "dirty.jsonl");
    std::string line;
    for (int i = 0; std::getline(in, line); ++i) {
      out << line << "\n";
      if (i == 10) out << "{broken\n";
    }
  }
  REQUIRE(run("stream " + at("m.isns") + " -i " + at("dirty.jsonl") + " -o " + at("events.jsonl") +
              " --predictions " + at("pred.jsonl")) == 0);
  CHECK(lines(kDir / "pred.jsonl") > 0);
  CHECK(slurp(kDir / "stderr.txt").find("malformed") != std::string::npos);
  std::ifstream ev(kDir / "events.jsonl");
  for (std::string line; std::getline(ev, line);) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("t"));
    CHECK(j.contains("id"));
    CHECK((j["event"] == "engage" || j["event"] == "disengage"));
  }
  fs::remove_all(kDir);
}

TEST_CASE("exit codes") {
  fs::create_directories(kDir);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train") == 1);
  CHECK(run("train /nonexistent/seqs.jsonl") == 2);
  CHECK(run("inspect-model /nonexistent/model.isns") == 2);
  CHECK(run("simulate -n 5 --sample-rate 10 -o " + at("s.jsonl")) == 0);
  CHECK(run("train " + at("s.jsonl") + " --model perceptron") == 1);
  fs::remove_all(kDir);
}
