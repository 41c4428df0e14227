#include "doctest.h"

#include "hairforge/assets.hpp"
#include "hairforge/cli.hpp"
#include "hairforge/imaging.hpp"
#include "hairforge/protocol.hpp"
#include "support.hpp"

#include "json.hpp"

#include <csignal>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace hairforge;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "hairforge");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

nlohmann::json run_json(std::vector<std::string> args) {
  const auto r = run(std::move(args));
  REQUIRE(r.code == 0);
  return nlohmann::json::parse(r.out);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == cli::kOk);
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"dance"}).code == cli::kUsage);
    CHECK(run({"grow"}).code == cli::kUsage);
    CHECK(run({"simulate", "--fixture", "pendulum", "--steps", "-1"}).code == cli::kUsage);
    CHECK(run({"simulate", "--fixture", "pendulum", "--in", "x.hair"}).code == cli::kUsage);
  }

  TEST_CASE("grow writes a deterministic strand") {
    hftest::TempDir dir;
    const auto a = dir.file("a.hair"), b = dir.file("b.hair"), c = dir.file("c.hair");
    REQUIRE(run({"grow", "--steps", "16", "--seed", "3", "--out", a}).code == 0);
    REQUIRE(run({"grow", "--steps", "16", "--seed", "3", "--out", b}).code == 0);
    REQUIRE(run({"grow", "--steps", "16", "--seed", "4", "--out", c}).code == 0);
    const auto ha = assets::read_hairstyle(a);
    REQUIRE(ha.strands.size() == 1);
    CHECK(ha.strands[0].size() == 17);
    CHECK(assets::read_file(a) == assets::read_file(b));
    CHECK(assets::read_file(a) != assets::read_file(c));
    CHECK(run({"grow", "--p-gamma-cap", "1.5", "--out", a}).code == cli::kValidation);
    CHECK(run({"grow", "--root", "1,2", "--out", a}).code == cli::kUsage);
  }

  TEST_CASE("grow reads a params file") {
    hftest::TempDir dir;
    std::ofstream(dir.file("p.json")) << R"({"steps": 5, "p_gravity": 0.2})";
    REQUIRE(run({"grow", "--params", dir.file("p.json"), "--out", dir.file("s.hair")}).code == 0);
    CHECK(assets::read_hairstyle(dir.file("s.hair")).strands[0].size() == 6);
    std::ofstream(dir.file("bad.json")) << R"({"steps": "many"})";
    CHECK(run({"grow", "--params", dir.file("bad.json"), "--out", dir.file("s.hair")}).code == cli::kValidation);
  }

  TEST_CASE("grow sweep writes a grid and a manifest") {
    hftest::TempDir dir;
    const auto out = dir.file("sweep");
    REQUIRE(run({"grow", "--sweep", "ph=0.2,0.5,1.0", "pgamma=0.0,0.05,0.1", "--out", out}).code == 0);
    std::ifstream in(out + "/manifest.json");
    const auto manifest = nlohmann::json::parse(in);
    REQUIRE(manifest["cells"].size() == 9);
    for (const auto& cell : manifest["cells"]) {
      CHECK(assets::read_hairstyle(out + "/" + cell["file"].get<std::string>()).strands.size() == 1);
    }
    CHECK(run({"grow", "--sweep", "speed=1", "--out", out}).code == cli::kUsage);
  }

  TEST_CASE("simulate with zero steps leaves the input unchanged") {
    hftest::TempDir dir;
    REQUIRE(run({"simulate", "--fixture", "pixie", "--steps", "0", "--out", dir.file("o.hair")}).code == 0);
    const auto j = run_json({"simulate", "--fixture", "pixie", "--steps", "0", "--json"});
    CHECK(j["max_displacement_cm"] == 0.0);
    CHECK(j["kinetic_energy"] == 0.0);
  }

  TEST_CASE("simulate without forces keeps the rest pose") {
    const auto j = run_json({"simulate", "--fixture", "short_bob", "--no-gravity", "--steps", "60", "--json"});
    CHECK(j["max_displacement_cm"].get<double>() < 1e-9);
  }

  TEST_CASE("simulate the pendulum to its equilibrium") {
    const auto j = run_json({"simulate", "--fixture", "pendulum", "--steps", "3000", "--json"});
    CHECK(j["max_displacement_cm"].get<double>() == doctest::Approx(981.0 / 170000.0).epsilon(1e-3));
    CHECK(j["kinetic_energy"].get<double>() < 1e-6);
  }

  TEST_CASE("simulate records a trajectory and reads .hair input") {
    hftest::TempDir dir;
    REQUIRE(run({"grow", "--steps", "8", "--out", dir.file("g.hair")}).code == 0);
    const auto j = run_json({"simulate", "--in", dir.file("g.hair"), "--steps", "20", "--record-every", "5", "--no-head",
                             "--wind", "100", "--trajectory", dir.file("t.bin"), "--json"});
    CHECK(j["frames_recorded"] == 5);
    const auto bytes = assets::read_file(dir.file("t.bin"));
    CHECK(bytes.size() == 5 * (12 + 4 + 9 * 12));
    const auto first = protocol::decode_frame(std::span(bytes.data(), 12 + 4 + 9 * 12));
    CHECK(first.frame_id == 0);
    CHECK(run({"simulate", "--in", dir.file("none.hair")}).code == cli::kRuntime);
    CHECK(run({"simulate", "--fixture", "nope"}).code == cli::kRuntime);
    CHECK(run({"simulate", "--fixture", "pendulum", "--wind", "10", "--wind-dir", "0,0,0"}).code != cli::kOk);
  }

  TEST_CASE("index build and retrieve") {
    hftest::TempDir dir;
    REQUIRE(run({"fixtures", "--out", dir.file("db")}).code == 0);
    const auto built = run({"index", "build", "--db", dir.file("db"), "--out", dir.file("idx/styles.hidx")});
    REQUIRE(built.code == 0);
    CHECK(std::filesystem::exists(dir.file("idx/thumbnails/short_bob.png")));
    const auto idx = assets::load_index(dir.file("idx/styles.hidx"));
    CHECK(idx.size() == 12);
    for (const auto& [query, expected] : std::vector<std::pair<std::string, std::string>>{
             {"short bob", "short_bob"}, {"medium wavy", "medium_wavy"}, {"long curly", "long_curly"}}) {
      const auto j = run_json({"retrieve", "--index", dir.file("idx/styles.hidx"), "--query", query, "--json"});
      CHECK(j["results"].size() == 3);
      CHECK(j["results"][0]["id"] == expected);
    }
    const auto text = run({"retrieve", "--index", dir.file("idx/styles.hidx"), "--query", "pixie", "--k", "1"});
    CHECK(text.out.find("pixie") != std::string::npos);
    CHECK(run({"retrieve", "--index", dir.file("idx/styles.hidx"), "--query", " "}).code == cli::kValidation);
    CHECK(run({"retrieve", "--index", dir.file("idx/styles.hidx"), "--query", "bob", "--provider",
               "fallback-hash-8"})
              .code == cli::kRuntime);
    CHECK(run({"validate", "--in", dir.file("db/pixie.hair")}).code == 0);
  }

  TEST_CASE("validate reports invalid hairstyles") {
    hftest::TempDir dir;
    Hairstyle h;
    h.strands.push_back({{Vec3::Zero()}});
    assets::write_hairstyle(h, dir.file("bad.hair"));
    const auto r = run({"validate", "--in", dir.file("bad.hair")});
    CHECK(r.code == cli::kValidation);
    CHECK(r.out.find("min_vertices") != std::string::npos);
  }

  TEST_CASE("edges of a constant image are black") {
    hftest::TempDir dir;
    const auto png = imaging::encode_png(imaging::GrayImage(32, 24, 128));
    assets::write_file(dir.file("flat.png"), png);
    REQUIRE(run({"edges", "--in", dir.file("flat.png"), "--out", dir.file("e.png")}).code == 0);
    const auto e = imaging::decode_png(assets::read_file(dir.file("e.png")));
    CHECK(e.width == 32);
    CHECK(std::all_of(e.data.begin(), e.data.end(), [](auto v) { return v == 0; }));
    CHECK(run({"edges", "--in", dir.file("flat.png"), "--out", dir.file("e.png"), "--low", "50", "--high", "40"})
              .code == cli::kValidation);
  }

  TEST_CASE("bench rows and csv") {
    const auto row = cli::bench(20, 8, 3, 1);
    CHECK(row.particles == 160);
    CHECK(row.frames == 3);
    CHECK(row.p50_ms > 0.0);
    CHECK(row.max_ms >= row.p50_ms);
    const auto r = run({"bench", "--strands", "10,20", "--vertices", "6", "--frames", "2", "--warmup", "0"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind(cli::bench_csv_header(), 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
  }

  TEST_CASE("url parsing and providers") {
    const auto e = cli::parse_url("http://embed.local:9000/v1/embed");
    CHECK(e.host == "embed.local");
    CHECK(e.port == 9000);
    CHECK(e.path == "/v1/embed");
    CHECK(cli::parse_url("http://h").path == "/");
    CHECK(cli::parse_url("http://h").port == 80);
    CHECK_THROWS_AS(cli::parse_url("ftp://h"), Error);
    CHECK_THROWS_AS(cli::parse_url("http://h:notaport"), Error);
    CHECK(cli::make_provider("fallback")->dim() == retrieval::kDefaultDim);
    CHECK(cli::make_provider("fallback-hash-64")->id() == "fallback-hash-64");
    CHECK(cli::make_provider("http://127.0.0.1:1/e")->id().find("http") != std::string::npos);
    CHECK(cli::exit_code_for(ErrorCode::EmptyText) == cli::kValidation);
    CHECK(cli::exit_code_for(ErrorCode::IoError) == cli::kRuntime);
  }

  TEST_CASE("serve answers health checks and stops on SIGTERM") {
    int pipefd[2];
    REQUIRE(pipe(pipefd) == 0);
    const pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
      dup2(pipefd[1], STDOUT_FILENO);
      close(pipefd[0]);
      close(pipefd[1]);
      execl(HAIRFORGE_CLI_PATH, HAIRFORGE_CLI_PATH, "serve", "--port", "0", nullptr);
      _exit(127);
    }
    close(pipefd[1]);
    std::string line;
    char ch = 0;
    while (read(pipefd[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
    CAPTURE(line);
    REQUIRE(line.rfind("listening on 127.0.0.1:", 0) == 0);
    const auto port = static_cast<unsigned short>(std::stoi(line.substr(line.rfind(':') + 1)));
    const auto r = hftest::http_get(port, "/healthz");
    CHECK(r.status == 200);
    CHECK(r.body == "ok");
    CHECK(nlohmann::json::parse(hftest::http_get(port, "/styles").body).size() == 12);
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    close(pipefd[0]);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
  }
}
