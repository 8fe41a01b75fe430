#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string gss_bin() {
  const char* bin = std::getenv("GSS_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "GSS_BIN must point at the gss executable");
  return bin;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("gss_cli_out_" + std::to_string(counter++));
  const std::string cmd = gss_bin() + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.code = WEXITSTATUS(rc);
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

fs::path work_dir() {
  fs::path p = fs::temp_directory_path() / "gss_cli_work";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("--help prints usage and exits 0") {
  auto r = run("--help");
  CHECK(r.code == 0);
  CHECK(r.out.find("Usage") != std::string::npos);
  CHECK(r.out.find("search") != std::string::npos);
  // provenance of defaults is documented
  auto rh = run("search --help");
  CHECK(rh.code == 0);
  CHECK(rh.out.find("published") != std::string::npos);
}

TEST_CASE("search without --corpus fails with the flag named") {
  auto r = run("search --node 0 -k 1");
  CHECK(r.code != 0);
  CHECK(r.out.find("corpus") != std::string::npos);
}

TEST_CASE("unknown subcommands and bad flags are usage errors") {
  CHECK(run("frobnicate").code == 2);
  CHECK(run("search --not-a-flag 1").code == 2);
}

TEST_CASE("missing corpus file is a data error (exit 3)") {
  auto r = run("search --corpus /nonexistent/corpus.json --node 0 -k 1");
  CHECK(r.code == 3);
}

TEST_CASE("fixture barbell then search prints the bridge target") {
  const fs::path dir = work_dir();
  auto fx = run("fixture barbell --seed 7 --out " + (dir / "fx").string());
  REQUIRE(fx.code == 0);
  const json fxj = json::parse(fx.out);
  const auto bridge = fxj.at("bridge").get<unsigned>();

  auto sr = run("search --corpus " + (dir / "fx" / "corpus.json").string() + " --node 0 -k 1");
  REQUIRE(sr.code == 0);
  const json out = json::parse(sr.out);
  REQUIRE(out.at("hits").size() == 1);
  CHECK(out["hits"][0]["node"].get<unsigned>() == bridge);
  CHECK(out["hits"][0]["path"]["nodes"].size() >= 2);
  CHECK(out.contains("config"));  // resolved config is echoed
}

TEST_CASE("ingest round trip and GSS_CORPUS environment default") {
  const fs::path dir = work_dir();
  REQUIRE(run("fixture blocks --seed 3 --out " + (dir / "blk").string()).code == 0);
  auto ing = run("ingest --corpus " + (dir / "blk" / "corpus.json").string() + " --out " +
                 (dir / "norm").string());
  CHECK(ing.code == 0);
  CHECK(fs::exists(dir / "norm" / "corpus.json"));

  // GSS_CORPUS can replace --corpus
  const std::string cmd = "GSS_CORPUS=" + (dir / "blk" / "corpus.json").string() + " " +
                          gss_bin() + " ingest --out " + (dir / "norm2").string() +
                          " > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  CHECK(fs::exists(dir / "norm2" / "corpus.json"));
}

TEST_CASE("end-to-end: train, build hierarchy, search both modes, evaluate, bench") {
  const fs::path dir = work_dir();
  REQUIRE(run("fixture blobs --seed 2 --n 200 --blobs 10 --dim 6 --rank 2 --out " +
              (dir / "corpus").string())
              .code == 0);
  const std::string corpus = " --corpus " + (dir / "corpus" / "corpus.json").string();

  auto hb = run("build-hierarchy" + corpus + " --rho 0.2 --levels 2 --seed 4 --out " +
                (dir / "hier").string());
  REQUIRE(hb.code == 0);

  auto flat = run("search" + corpus + " --node 5 -k 3");
  REQUIRE(flat.code == 0);
  auto hier = run("search" + corpus + " --node 5 -k 3 --hier " + (dir / "hier").string());
  REQUIRE(hier.code == 0);
  CHECK(json::parse(hier.out)["diagnostics"]["level_settled"].size() == 2);

  {
    std::ofstream q(dir / "queries.json");
    q << R"([{"id":"q0","node":5,"k":3},{"id":"q1","node":50,"k":3}])";
    std::ofstream j(dir / "judgments.json");
    j << R"({"q0":{"6":1.0},"q1":{"51":1.0}})";
  }
  auto ev = run("evaluate" + corpus + " --queries " + (dir / "queries.json").string() +
                " --judgments " + (dir / "judgments.json").string() +
                " --methods cosine,geodesic-flat --seeds 2 --out " + (dir / "results.csv").string());
  REQUIRE(ev.code == 0);
  std::ifstream csv(dir / "results.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "method,metric,mean,std,seeds");

  auto bm = run("bench metric --dim 32 --rank 4 --iters 10000");
  CHECK(bm.code == 0);
  CHECK(json::parse(bm.out).contains("ns_per_distance"));

  auto bd = run("bench dijkstra" + corpus + " --queries 5 -k 3");
  CHECK(bd.code == 0);
  CHECK(json::parse(bd.out).contains("settled_p50"));
}

TEST_CASE("train-toy export is searchable and the trace is written") {
  const fs::path dir = work_dir();
  REQUIRE(run("fixture blocks --seed 3 --out " + (dir / "blk").string()).code == 0);
  auto tr = run("train-toy --corpus " + (dir / "blk" / "corpus.json").string() +
                " --epochs 8 --lr 1e-3 --seed 1 --dim 8 --rank 2 --out " + (dir / "tr").string());
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(dir / "tr" / "trace.csv"));
  std::ifstream trace(dir / "tr" / "trace.csv");
  std::string header;
  std::getline(trace, header);
  CHECK(header == "epoch,total,contrast,rank,smooth,hier");

  auto sr = run("search --corpus " + (dir / "tr" / "corpus.json").string() + " --node 0 -k 2");
  CHECK(sr.code == 0);
}

TEST_CASE("reruns with identical seeds produce byte-identical outputs") {
  const fs::path dir = work_dir();
  REQUIRE(run("fixture blobs --seed 11 --n 100 --blobs 5 --dim 4 --rank 2 --out " +
              (dir / "a").string())
              .code == 0);
  REQUIRE(run("fixture blobs --seed 11 --n 100 --blobs 5 --dim 4 --rank 2 --out " +
              (dir / "b").string())
              .code == 0);
  for (const char* f : {"embeddings.f32", "factors.f32", "graph_indices.u64"}) {
    std::ifstream fa(dir / "a" / f, std::ios::binary), fb(dir / "b" / f, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  auto s1 = run("search --corpus " + (dir / "a" / "corpus.json").string() + " --node 1 -k 4");
  auto s2 = run("search --corpus " + (dir / "a" / "corpus.json").string() + " --node 1 -k 4");
  CHECK(s1.out == s2.out);
}
