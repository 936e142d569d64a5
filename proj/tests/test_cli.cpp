#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "xienh/cli.hpp"
#include "xienh/io.hpp"

using namespace xienh;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "xienh");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  const auto dir = fs::temp_directory_path() / "xienh_test_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string toy(const std::string& name) { return (fs::path(XIENH_TOY_DATA) / name).string(); }

const std::vector<std::string> kTinyModel = {"--spec", "mb-tcn:2", "--d-model", "16", "--d-f", "4",
                                             "--branches", "2", "--epochs", "1", "--batch-size", "5",
                                             "--quiet"};

Run train_tiny(const fs::path& out) {
  auto args = std::vector<std::string>{"train", "--clean", toy("clean.txt"), "--noise", toy("noise.txt"),
                                       "--stats", toy("stats.bin"), "--out", out.string()};
  args.insert(args.end(), kTinyModel.begin(), kTinyModel.end());
  return cli(args);
}

}  // namespace

TEST_CASE("info") {
  const auto r = cli({"info", "--spec", "mb-tcn:12"});
  CHECK(r.code == 0);
  CHECK(r.out.find("receptive field: 131 frames (2.096 s)") != std::string::npos);
  CHECK(r.out.find("parameters: ") != std::string::npos);
  CHECK(cli({"info", "--spec", "mb-tcn:20"}).out.find("249 frames (3.984 s)") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  const auto missing_arg = cli({"enhance", "--in", "x.wav"});
  CHECK(missing_arg.code == 2);
  CHECK(missing_arg.err.find("--ckpt") != std::string::npos);
  CHECK(cli({"enhance", "--ckpt", "a", "--in", "b", "--out", "c", "--gain", "wiener"}).code == 2);

  const auto io_error = cli({"enhance", "--ckpt", "/nonexistent/m.ximb", "--in", "b.wav", "--out", "c"});
  CHECK(io_error.code == 1);
  CHECK(io_error.err.rfind("error: ", 0) == 0);
  CHECK(cli({"info", "--spec", "resnet:3"}).code == 1);

  // Same contract from the real binary.
  const std::string bin = XIENH_CLI;
  CHECK(std::system((bin + " info --spec mb-tcn:4 > /dev/null").c_str()) == 0);
  CHECK(WEXITSTATUS(std::system((bin + " bogus 2> /dev/null").c_str())) == 2);
  CHECK(WEXITSTATUS(std::system((bin + " info --ckpt /nonexistent 2> /dev/null").c_str())) == 1);
}

TEST_CASE("mix, train, enhance, eval") {
  const auto dir = workdir();
  const auto mixes = dir / "mix";
  const auto mix = cli({"mix", "--clean", toy("clean.txt"), "--noise", toy("noise.txt"), "--snr-db", "0,5",
                        "--out", mixes.string(), "--seed", "3"});
  REQUIRE(mix.code == 0);
  CHECK(fs::exists(mixes / "noisy" / "utt00_0dB.wav"));
  CHECK(fs::exists(mixes / "clean" / "utt04_5dB.wav"));
  CHECK(fs::exists(mixes / "mix.csv"));

  const auto ckpt = dir / "m.ximb";
  const auto tr = train_tiny(ckpt);
  INFO(tr.err);
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(dir / "m.ximb.loss.csv"));
  CHECK(cli({"info", "--ckpt", ckpt.string()}).out.find("stats bins: 257") != std::string::npos);

  const auto enh = dir / "enh";
  const auto e = cli({"enhance", "--ckpt", ckpt.string(), "--in", (mixes / "noisy").string(), "--out",
                      enh.string(), "--gain", "srwf", "--spectrogram", (dir / "png").string()});
  REQUIRE(e.code == 0);
  const auto noisy = io::read_wav(mixes / "noisy" / "utt02_5dB.wav");
  CHECK(io::read_wav(enh / "utt02_5dB.wav").size() == noisy.size());
  CHECK(fs::exists(dir / "png" / "utt02_5dB_enhanced.png"));
  CHECK(fs::exists(dir / "png" / "utt02_5dB_noisy.png"));

  // Enhanced == noisy: zero improvement in every row.
  const auto report = dir / "report.csv";
  const auto ev = cli({"eval", "--clean", (mixes / "clean").string(), "--noisy", (mixes / "noisy").string(),
                       "--enhanced", (mixes / "noisy").string(), "--out", report.string()});
  REQUIRE(ev.code == 0);
  const auto bytes = io::read_file(report);
  std::istringstream csv(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "file,snr_db,noise,seg_snr_noisy,seg_snr_enhanced,ssnr_plus");
  int rows = 0;
  std::string last;
  while (std::getline(csv, line)) {
    ++rows;
    last = line;
    CHECK(line.substr(line.rfind(',') + 1) == "0.000000");
  }
  CHECK(rows == 11);
  CHECK(last.rfind("mean,,,", 0) == 0);
  std::istringstream first(std::string(bytes.begin(), bytes.end()));
  std::getline(first, line);
  std::getline(first, line);
  CHECK(line.rfind("utt00_0dB.wav,0,", 0) == 0);
}

TEST_CASE("fixed seeds give byte-identical outputs") {
  const auto dir = workdir();
  for (const char* run : {"a", "b"}) {
    const auto sub = dir / run;
    REQUIRE(cli({"mix", "--clean", toy("clean.txt"), "--noise", toy("noise.txt"), "--snr-db", "-5", "--out",
                 (sub / "mix").string(), "--seed", "11"})
                .code == 0);
    REQUIRE(train_tiny(sub / "m.ximb").code == 0);
    REQUIRE(cli({"enhance", "--ckpt", (sub / "m.ximb").string(), "--in", (sub / "mix" / "noisy").string(),
                 "--out", (sub / "enh").string()})
                .code == 0);
  }
  for (const char* rel : {"mix/mix.csv", "mix/noisy/utt01_-5dB.wav", "m.ximb", "m.ximb.loss.csv",
                          "enh/utt03_-5dB.wav"}) {
    INFO(rel);
    CHECK(io::read_file(dir / "a" / rel) == io::read_file(dir / "b" / rel));
  }
}
