#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vitppg/train_eval.hpp"

namespace fs = std::filesystem;
using namespace vitppg;

namespace {

const fs::path& root() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "vitppg_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the CLI with `args`, stdout to `capture` (when given); returns the exit code.
int run(const std::string& args, const fs::path& capture = {}) {
  std::string cmd = std::string("\"") + VITPPG_CLI + "\" " + args;
  cmd += capture.empty() ? " >/dev/null 2>&1" : " >\"" + capture.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

fs::path dataset(int n, int seed) {
  const fs::path dir = root() / ("data_" + std::to_string(n) + "_" + std::to_string(seed));
  if (!fs::exists(dir / "synth.jsonl")) {
    REQUIRE(run("synth --n-records " + std::to_string(n) + " --seed " + std::to_string(seed) + " --out-dir " + q(dir)) ==
            0);
  }
  return dir / "synth.jsonl";
}

}  // namespace

TEST_CASE("every command answers --help") {
  CHECK(run("--help") == 0);
  for (auto cmd : {"imagify", "synth", "train", "eval", "inspect"}) CHECK(run(std::string(cmd) + " --help") == 0);
  const auto help = root() / "train_help.txt";
  run("train --help", help);
  const std::string text = slurp(help);
  for (auto flag : {"--data", "--target", "--epochs", "--lr", "--seed", "--workers", "--out-dir", "--repr"})
    CHECK(text.find(flag) != std::string::npos);
}

TEST_CASE("synth is reproducible and honours the output directory variable") {
  const auto a = root() / "synth_a", b = root() / "synth_b";
  REQUIRE(run("synth --n-records 12 --seed 4 --out-dir " + q(a)) == 0);
  const std::string env = "VITPPG_OUT_DIR=" + q(b);
  REQUIRE(std::system((env + " \"" + VITPPG_CLI + "\" synth --n-records 12 --seed 4 >/dev/null").c_str()) == 0);
  CHECK(slurp(a / "synth.jsonl") == slurp(b / "synth.jsonl"));
  CHECK(load_dataset((a / "synth.jsonl").string()).size() == 12);
}

TEST_CASE("imagify writes one container per record") {
  const auto data = dataset(10, 1);
  const auto out = root() / "img_stft";
  REQUIRE(run("imagify --input " + q(data) + " --repr stft --out-dir " + q(out) + " --preview") == 0);
  int count = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    if (entry.path().extension() != ".vpna") continue;
    ++count;
    const auto ar = ArrayArchive::load(entry.path().string());
    CHECK(ar.get("channels").shape == std::vector<std::uint64_t>{3, 65, 34});
    CHECK(ar.get("valid_mask").shape == std::vector<std::uint64_t>{65, 34});
    CHECK(ar.manifest.at("repr") == "stft");
  }
  CHECK(count == 10);
  CHECK(fs::exists(out / "previews" / "synth-00000_c1.pgm"));

  const auto again = root() / "img_stft_again";
  REQUIRE(run("imagify --input " + q(data) + " --repr stft --workers 3 --out-dir " + q(again)) == 0);
  CHECK(slurp(out / "synth-00004.vpna") == slurp(again / "synth-00004.vpna"));

  const auto rec = root() / "img_rec";
  REQUIRE(run("imagify --input " + q(data) + " --repr recurrence --out-dir " + q(rec)) == 0);
  CHECK(ArrayArchive::load((rec / "synth-00000.vpna").string()).get("channels").shape ==
        std::vector<std::uint64_t>{3, 240, 240});
}

TEST_CASE("inspect reports the full-size geometry") {
  const auto out = root() / "inspect.txt";
  REQUIRE(run("inspect --backbone dinov3_like --preset full", out) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("N             15") != std::string::npos);
  CHECK(text.find("tokens        20") != std::string::npos);
  CHECK(text.find("lora/layer    36864") != std::string::npos);
  CHECK(text.find("patch grid    5x3") != std::string::npos);

  REQUIRE(run("inspect --backbone siglip2_like --preset tiny", out) == 0);
  CHECK(slurp(out).find("tokens        16") != std::string::npos);
}

TEST_CASE("train twice, evaluate, and compare") {
  const auto data = dataset(40, 2);
  const auto a = root() / "train_a", b = root() / "train_b";
  const std::string args = "train --data " + q(data) + " --epochs 2 --batch-size 8 --lr 1e-3 --seed 9 --out-dir ";
  REQUIRE(run(args + q(a)) == 0);
  REQUIRE(run(args + q(b) + " --workers 2") == 0);
  CHECK(slurp(a / "checkpoint.vpna") == slurp(b / "checkpoint.vpna"));

  auto strip_wall = [](const std::string& log) {
    std::istringstream is(log);
    std::string out, line;
    while (std::getline(is, line)) {
      auto j = nlohmann::json::parse(line);
      j.erase("wall_ms");
      out += j.dump() + "\n";
    }
    return out;
  };
  const std::string log_a = strip_wall(slurp(a / "train_log.jsonl"));
  CHECK(log_a == strip_wall(slurp(b / "train_log.jsonl")));
  CHECK(std::count(log_a.begin(), log_a.end(), '\n') == 2);

  const auto ev = root() / "eval_a";
  REQUIRE(run("eval --data " + q(data) + " --checkpoint " + q(a / "checkpoint.vpna") + " --out-dir " + q(ev)) == 0);
  CHECK(slurp(ev / "report.txt").find("Heart rate (BPM)") != std::string::npos);
  const auto rec = nlohmann::json::parse(slurp(ev / "report.jsonl"));
  CHECK(rec.at("count") == 4);
  const double best_val = [&] {
    double best = 1e300;
    std::istringstream is(slurp(a / "train_log.jsonl"));
    std::string line;
    while (std::getline(is, line)) best = std::min(best, nlohmann::json::parse(line).at("val_mae").get<double>());
    return best;
  }();
  CHECK(rec.at("mae").get<double>() == best_val);

  CHECK(run("eval --data " + q(data) + " --checkpoint " + q(a / "checkpoint.vpna") + " --target rr --out-dir " +
            q(ev)) != 0);
}

TEST_CASE("a perfect predictor renders 0.00/0.00") {
  auto records = load_dataset(dataset(10, 3).string());
  for (auto& r : records) {
    r.labels["dbp"] = 80.0;
    r.labels["sbp"] = 120.0;
  }
  const auto dir = root() / "perfect";
  fs::create_directories(dir);
  save_dataset((dir / "bp.jsonl").string(), records);
  for (auto [target, value] : {std::pair{"dbp", 80.0}, std::pair{"sbp", 120.0}}) {
    Checkpoint c;
    c.model = init_model(make_profile("dinov3_like", "tiny"), LoraConfig{}, true, target, 1);
    c.model.head.out_weight.setZero();
    c.model.head.out_bias.setZero();
    c.model.label = {value, 1.0};
    save_checkpoint((dir / (std::string(target) + ".vpna")).string(), c);
  }
  REQUIRE(run("eval --data " + q(dir / "bp.jsonl") + " --checkpoint " + q(dir / "dbp.vpna") + " --checkpoint " +
              q(dir / "sbp.vpna") + " --split all --layout bp_slash --row PPG-BP --column DINOv3 --column DINOv3" +
              " --out-dir " + q(dir)) == 0);
  const std::string table = slurp(dir / "report.txt");
  CHECK(table.find("0.00/0.00") != std::string::npos);
  CHECK(table.find("PPG-BP") != std::string::npos);

  CHECK(run("eval --data " + q(dir / "bp.jsonl") + " --checkpoint " + q(dir / "dbp.vpna") +
            " --split all --layout bp_slash --out-dir " + q(dir)) == 2);
}

TEST_CASE("exit codes") {
  CHECK(run("train --no-such-flag") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("synth --fs 3 --out-dir " + q(root() / "nyq")) == 1);
  CHECK(run("eval --data " + q(root() / "missing.jsonl") + " --checkpoint " + q(root() / "missing.vpna")) == 2);

  const auto bad = root() / "bad.jsonl";
  std::ofstream(bad) << R"({"id":"a","fs":40,"samples":[1,2,3],"labels":{}})" << "\n{oops\n";
  const auto err = root() / "bad_err.txt";
  CHECK(std::system(("\"" + std::string(VITPPG_CLI) + "\" imagify --input " + q(bad) + " --out-dir " +
                     q(root() / "bad_out") + " >/dev/null 2>" + q(err))
                        .c_str()) != 0);
  CHECK(run("imagify --input " + q(bad) + " --out-dir " + q(root() / "bad_out")) == 2);
  CHECK(slurp(err).find("line 2") != std::string::npos);

  // Labels so large that their mean overflows: training must stop with a numeric failure.
  auto records = load_dataset(dataset(20, 4).string());
  for (auto& r : records) r.labels["hr"] = 1.7e308;
  save_dataset((root() / "huge.jsonl").string(), records);
  CHECK(run("train --data " + q(root() / "huge.jsonl") + " --epochs 1 --out-dir " + q(root() / "huge")) == 3);
}
