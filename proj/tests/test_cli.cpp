#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "moranq/cli.hpp"

using moranq::testing::data_path;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::initializer_list<std::string> args) {
  std::vector<std::string> store{"moranq"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : store) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = moranq::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const std::string kCantor = data_path("cantor.json");
const std::string kInhom = data_path("inhomogeneous.json");

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "moranq_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = scratch(name);
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST_CASE("validate") {
  const Run ok = run({"validate", "--spec", kCantor});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("eta_r: 0.055555555555555552") != std::string::npos);

  const std::string bad = write_temp("bad.json", R"({"levels":[{"ratios":[0.3,0.3],"probs":[0.6,0.5]}]})");
  const Run inadmissible = run({"validate", "--spec", bad});
  CHECK(inadmissible.code == 1);
  CHECK(inadmissible.out.find("probs sum 1.1") != std::string::npos);

  CHECK(run({"validate", "--spec", "/nonexistent.json"}).code == 2);
  CHECK(run({"validate", "--spec", write_temp("junk.json", "{oops")}).code == 2);
  CHECK(run({"validate", "--spec", write_temp("shape.json", R"({"levels":3})")}).code == 1);
  CHECK(run({"quantize", "--spec", bad, "--depth", "4", "--n", "2"}).code == 1);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"quantize", "--spec", kCantor, "--depth", "8", "--n", "0"}).code == 2);
  CHECK(run({"quantize", "--spec", kCantor, "--depth", "8"}).code == 2);
  CHECK(run({"quantize", "--spec", kCantor, "--depth", "zero", "--n", "2"}).code == 2);
  CHECK(run({"quantize", "--spec", kCantor, "--depth", "8", "--n", "2", "--r", "-1"}).code == 2);
  CHECK(run({"quantize", "--spec", kCantor, "--depth", "8", "--n", "2", "--method", "magic"}).code == 2);
  CHECK(run({"sweep", "--spec", kCantor, "--depth", "8", "--n-min", "9", "--n-max", "4"}).code == 2);
  CHECK(run({"dims", "--spec", kCantor, "--depth", "8", "--n-min", "4", "--n-max", "7"}).code == 2);
  CHECK(run({"sweep", "--spec", kCantor, "--depth", "8", "--n-max", "8", "--k-rule", "nope"}).code == 2);
  CHECK(run({"validate", "--spec", kCantor, "--format", "xml"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("quantize") {
  const Run two = run({"quantize", "--spec", kCantor, "--depth", "12", "--n", "2"});
  REQUIRE(two.code == 0);
  CHECK(two.out.rfind("# n=2 r=2 cost=", 0) == 0);
  CHECK(lines(two.out) == 4);
  const Run one = run({"quantize", "--spec", kCantor, "--depth", "12", "--n", "1"});
  REQUIRE(one.code == 0);
  const std::string row = one.out.substr(one.out.rfind("0,"));
  CHECK(std::abs(std::stod(row.substr(2)) - 0.5) < 1e-9);

  CHECK(run({"quantize", "--spec", kCantor, "--depth", "4", "--n", "8"}).code == 3);
  const Run forced = run({"quantize", "--spec", kCantor, "--depth", "4", "--n", "8", "--force"});
  CHECK(forced.code == 0);
  CHECK(forced.err.find("warning") != std::string::npos);

  const Run auto_depth = run({"quantize", "--spec", kInhom, "--n", "6"});
  CHECK(auto_depth.code == 0);
  const Run lloyd = run({"quantize", "--spec", kCantor, "--depth", "8", "--n", "4", "--method", "lloyd"});
  CHECK(lloyd.code == 0);
  CHECK(lloyd.out.find("method=lloyd") != std::string::npos);
  const Run js = run({"quantize", "--spec", kCantor, "--depth", "8", "--n", "3", "--format", "jsonl"});
  CHECK(js.code == 0);
  CHECK(lines(js.out) == 4);
  CHECK(js.out.find("\"method\":\"dp-exact\"") != std::string::npos);
}

TEST_CASE("atoms and antichain") {
  const Run atoms = run({"atoms", "--spec", kCantor, "--depth", "3"});
  CHECK(atoms.code == 0);
  CHECK(lines(atoms.out) == 9);
  CHECK(run({"atoms", "--spec", kCantor}).code == 2);

  const Run ac = run({"antichain", "--spec", kCantor, "--k", "1"});
  CHECK(ac.code == 0);
  CHECK(lines(ac.out) == 5);
  CHECK(ac.out.rfind("word,lo,hi,c,p,E\n1.1,0,", 0) == 0);
  CHECK(ac.out.find(",0.25,") != std::string::npos);
  const Run root = run({"antichain", "--spec", kCantor, "--k", "0"});
  CHECK(root.out == "word,lo,hi,c,p,E\nroot,0,1,1,1,1\n");
  CHECK(run({"antichain", "--spec", kInhom, "--k", "3", "--format", "jsonl"}).code == 0);
}

TEST_CASE("sweep") {
  const Run sw = run({"sweep", "--spec", kCantor, "--depth", "10", "--n-min", "2", "--n-max", "40"});
  REQUIRE(sw.code == 0);
  CHECK(lines(sw.out) == 40);
  CHECK(sw.out.rfind("n,e_pow_r,e,delta,J_min,J_max,ratio_min,ratio_max,ratio_delta,spread,k_used\n", 0) == 0);
  CHECK(run({"sweep", "--spec", kCantor, "--depth", "5", "--n-max", "30"}).code == 3);
  const Run js = run({"sweep", "--spec", kCantor, "--depth", "10", "--n-max", "6", "--format", "jsonl"});
  CHECK(lines(js.out) == 5);
}

TEST_CASE("census") {
  const Run cen = run({"census", "--spec", kCantor, "--depth", "12", "--n", "64", "--force"});
  REQUIRE(cen.code == 0);
  CHECK(cen.out.find("k=5 phi=64 L_min=1") != std::string::npos);
  CHECK(cen.out.find("S_max=1") != std::string::npos);
  const Run root = run({"census", "--spec", kCantor, "--depth", "8", "--n", "4", "--k", "0"});
  REQUIRE(root.code == 0);
  CHECK(root.out.find("\nroot,0,1,4\n") != std::string::npos);
  CHECK(run({"census", "--spec", kCantor, "--depth", "8", "--n", "4", "--format", "jsonl"}).code == 0);
}

TEST_CASE("dims") {
  const Run d = run({"dims", "--spec", kCantor, "--depth", "10", "--n-min", "16", "--n-max", "64", "--force",
                     "--epsilons", "1/9,1/27,1/81"});
  REQUIRE(d.code == 0);
  CHECK(d.out.rfind("# dims r=2 depth=10 slope=", 0) == 0);
  CHECK(d.out.find("epsilon,sup_mass,reference_bound\n") != std::string::npos);
  CHECK(run({"dims", "--spec", kCantor, "--depth", "10", "--n-min", "16", "--n-max", "64", "--force",
             "--epsilons", "1e-9"}).code == 2);
  CHECK(run({"dims", "--spec", kCantor, "--depth", "10", "--n-min", "16", "--n-max", "64", "--force",
             "--epsilons", "x"}).code == 2);
}

TEST_CASE("every command is byte-identical on rerun") {
  const std::vector<std::vector<std::string>> commands{
      {"validate", "--spec", kInhom},
      {"atoms", "--spec", kInhom, "--depth", "6"},
      {"antichain", "--spec", kInhom, "--k", "3"},
      {"quantize", "--spec", kInhom, "--n", "12"},
      {"quantize", "--spec", kCantor, "--depth", "9", "--n", "12", "--method", "lloyd"},
      {"sweep", "--spec", kInhom, "--depth", "9", "--n-max", "30", "--force"},
      {"census", "--spec", kCantor, "--depth", "10", "--n", "32", "--format", "jsonl"},
      {"dims", "--spec", kCantor, "--depth", "9", "--n-min", "8", "--n-max", "32", "--force", "--epsilons",
       "0.1,0.01"},
  };
  int idx = 0;
  for (const auto& cmd : commands) {
    std::string first, second;
    for (std::string* sink : {&first, &second}) {
      const auto path = scratch("rerun_" + std::to_string(idx) + ".out");
      std::filesystem::remove(path);
      std::vector<std::string> store{"moranq"};
      store.insert(store.end(), cmd.begin(), cmd.end());
      store.push_back("--out");
      store.push_back(path.string());
      std::vector<const char*> argv;
      for (const auto& s : store) argv.push_back(s.c_str());
      std::ostringstream out, err;
      REQUIRE(moranq::run_cli(static_cast<int>(argv.size()), argv.data(), out, err) == 0);
      CHECK(out.str().empty());
      *sink = slurp(path);
    }
    CHECK(!first.empty());
    CHECK(first == second);
    ++idx;
  }
}
