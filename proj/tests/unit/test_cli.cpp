#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gisad/gis_flow.hpp"
#include "gisad/io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace gisad;

namespace {

// Fresh scratch directory per test, removed afterwards.
struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("gisad_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  // Runs the CLI inside the workspace and returns its exit code.
  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && '" GISAD_CLI_PATH "' " + args +
                            " >stdout.txt 2>stderr.txt";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const std::string& name) const {
    std::ifstream is(dir / name, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name, std::ios::binary) << text;
  }
  bool exists(const std::string& name) const { return fs::exists(dir / name); }
  nlohmann::json manifest(const std::string& name) const { return nlohmann::json::parse(read(name)); }
  std::size_t partial_files() const {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".partial") ++n;
    }
    return n;
  }
};

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and usage errors") {
  Workspace w("help");
  CHECK(w.run("--help") == 0);
  for (const char* sub : {"features", "fit", "score", "synth"}) {
    CHECK(w.run(std::string(sub) + " --help") == 0);
    CHECK(w.read("stdout.txt").find("--config") != std::string::npos);
  }
  CHECK(w.run("") == 2);
  CHECK(w.run("fit --no-such-flag") == 2);
  CHECK(w.run("synth galaxy -o x") == 2);
  CHECK(w.run("fit -i missing.csv") == 2);
}

TEST_CASE("synth is reproducible") {
  Workspace w("synth");
  REQUIRE(w.run("synth toy --seed 7 -o a") == 0);
  REQUIRE(w.run("synth toy --seed 7 -o b") == 0);
  CHECK(w.read("a.features.csv") == w.read("b.features.csv"));
  CHECK(w.read("a.labels.csv") == w.read("b.labels.csv"));
  const auto ma = w.manifest("a.manifest.json");
  const auto mb = w.manifest("b.manifest.json");
  CHECK(ma["outputs"]["a.features.csv"] == mb["outputs"]["b.features.csv"]);
  CHECK(ma["config"]["seed"] == 7);
  CHECK(ma["counts"]["events"] == 50500);
  CHECK(ma["tool"] == "gisad");
  CHECK(ma["command"] == "synth");
  CHECK(count_lines(w.read("a.features.csv")) == 50501);

  REQUIRE(w.run("synth toy --seed 8 -o c") == 0);
  CHECK(w.read("a.features.csv") != w.read("c.features.csv"));
}

TEST_CASE("synth lhc defaults and empty output") {
  Workspace w("lhc");
  REQUIRE(w.run("synth lhc -o d") == 0);
  std::ifstream features(w.dir / "d.features.csv");
  const EventTable events = read_features_csv(features);
  std::ifstream labels_in(w.dir / "d.labels.csv");
  const auto labels = read_labels_csv(labels_in, events.ids);
  const double signal = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  CHECK(signal / static_cast<double>(labels.size()) == doctest::Approx(0.0008));
  CHECK(w.read("d.features.csv").rfind("event_id,m_jj,m_j1,dm,tau21_1,tau21_2\n", 0) == 0);

  REQUIRE(w.run("synth toy --n-background 0 --n-signal 0 -o e") == 0);
  CHECK(w.read("e.features.csv") == "event_id,m,x\n");
  CHECK(w.read("e.labels.csv") == "event_id,is_signal\n");
}

TEST_CASE("features agree with the reference pipeline") {
  Workspace w("features");
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> count(1, 40);
  std::ostringstream csv;
  csv << "event_id,pt,eta,phi,mass\n";
  std::vector<std::vector<Particle>> events;
  for (int i = 0; i < 100; ++i) {
    events.push_back(oracle::random_event(rng, count(rng)));
    write_particles_csv(csv, 1000 + i, events.back());
  }
  w.write("particles.csv", csv.str());

  REQUIRE(w.run("features -i particles.csv -o all.csv --window-lo 0 --window-hi 1e9") == 0);
  std::ifstream all_in(w.dir / "all.csv");
  const EventTable all = read_features_csv(all_in);
  std::size_t k = 0;
  std::size_t in_window = 0;
  for (int i = 0; i < 100; ++i) {
    const auto ref = oracle::features(events[static_cast<std::size_t>(i)], 1.0, 2.5);
    if (!ref) continue;
    REQUIRE(k < all.size());
    CHECK(all.ids[k] == 1000 + i);
    CHECK(all.m[k] == doctest::Approx(ref->m_jj).epsilon(1e-9));
    CHECK(all.x(static_cast<Eigen::Index>(k), 0) == doctest::Approx(ref->m_j1).epsilon(1e-9));
    CHECK(all.x(static_cast<Eigen::Index>(k), 3) == doctest::Approx(ref->tau21_2).epsilon(1e-9));
    if (ref->m_jj > 2250.0 && ref->m_jj < 4750.0) ++in_window;
    ++k;
  }
  CHECK(k == all.size());
  const auto m_all = w.manifest("all.csv.manifest.json");
  CHECK(m_all["counts"]["events_in"] == 100);
  CHECK(m_all["counts"]["events_out"] == k);

  REQUIRE(w.run("features -i particles.csv -o windowed.csv --manifest win.json") == 0);
  const auto m_win = w.manifest("win.json");
  CHECK(m_win["counts"]["events_out"] == in_window);
  CHECK(m_win["counts"]["rejected"]["outside_window"] == k - in_window);
  CHECK(m_win["inputs"][0]["path"] == "particles.csv");

  w.write("empty.csv", "event_id,pt,eta,phi\n");
  REQUIRE(w.run("features -i empty.csv -o none.csv") == 0);
  CHECK(w.read("none.csv") == "event_id,m_jj,m_j1,dm,tau21_1,tau21_2\n");

  w.write("broken.csv", "event_id,pt,eta,phi\n1,10,0\n");
  CHECK(w.run("features -i broken.csv -o out.csv") == 1);
  CHECK(w.read("stderr.txt").find("line 2") != std::string::npos);
  CHECK_FALSE(w.exists("out.csv"));
  CHECK(w.partial_files() == 0);
}

TEST_CASE("fit and score pipeline") {
  Workspace w("pipeline");
  REQUIRE(w.run("synth toy --n-background 6000 --n-signal 100 -o toy") == 0);

  SUBCASE("errors") {
    CHECK(w.run("fit -i nowhere.csv -m m.txt") == 1);
    CHECK(w.run("fit -i toy.features.csv -m m.txt --knots 4") == 2);
    CHECK_FALSE(w.exists("m.txt"));
    CHECK(w.partial_files() == 0);
    w.write("bad.cfg", "iterations = 3\nnot_a_key = 1\n");
    CHECK(w.run("fit -i toy.features.csv -m m.txt --config bad.cfg") == 2);
    w.write("bad_value.cfg", "iterations = many\n");
    CHECK(w.run("fit -i toy.features.csv -m m.txt --config bad_value.cfg") == 2);
    CHECK(w.run("fit -i toy.features.csv -m m.txt --bins 200 -q") == 1);
    CHECK(w.read("stderr.txt").find("bin") != std::string::npos);
    CHECK(w.run("score -i toy.features.csv -m missing.model -o s") == 1);
    CHECK(w.read("stderr.txt").find("missing.model") != std::string::npos);
  }

  SUBCASE("config file and flags") {
    w.write("fit.cfg", "# short fit\niterations = 4\nknots = 32\n");
    REQUIRE(w.run("fit -i toy.features.csv -m m.txt --config fit.cfg --iterations 2 -q") == 0);
    const auto man = w.manifest("m.txt.manifest.json");
    CHECK(man["config"]["n_iterations"] == 2);
    CHECK(man["config"]["knots_per_transform"] == 32);
    CHECK(man["counts"]["events"] == 6100);
    CHECK(man["outputs"]["m.txt"].get<std::string>().size() == 64);
    CHECK(man["inputs"][0]["sha256"].get<std::string>().size() == 64);
  }

  SUBCASE("end to end") {
    REQUIRE(w.run("fit -i toy.features.csv -m m.txt --iterations 5 -q") == 0);
    const FlowModel model = load_model_file((w.dir / "m.txt").string());
    save_model_file(model, (w.dir / "again.txt").string());
    CHECK(w.read("again.txt") == w.read("m.txt"));

    REQUIRE(w.run("score -i toy.features.csv -m m.txt -o s --sigma 1 --thresholds 2.5,1.5 "
                  "--labels toy.labels.csv") == 0);
    CHECK(count_lines(w.read("s.scores.csv")) == 6101);
    CHECK(w.read("s.scores.csv").rfind("event_id,m,alpha,p_signal,p_background,clamped_flag\n", 0) == 0);
    CHECK(w.read("s.scan.csv").rfind("m_lo,m_hi,count,alpha_max,alpha_p99\n", 0) == 0);
    const std::string summary = w.read("s.summary.txt");
    CHECK(summary.find("alpha > 1.5") < summary.find("alpha > 2.5"));
    const auto man = w.manifest("s.manifest.json");
    CHECK(man["config"]["cut_thresholds"] == nlohmann::json::array({1.5, 2.5}));
    CHECK(man["inputs"].size() == 3);
    for (const char* out : {"s.scores.csv", "s.scan.csv", "s.summary.txt"}) {
      CHECK(man["outputs"].contains(out));
    }
    CHECK(w.read("stdout.txt").find("signal") != std::string::npos);

    CHECK(w.run("score -i toy.features.csv -m m.txt -o t --n-quad 1") == 2);
    CHECK_FALSE(w.exists("t.scores.csv"));
  }
}

}
