#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "tife/anomaly.hpp"
#include "tife/attention_viz.hpp"
#include "tife/data.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result tife_run(std::vector<std::string> args) {
  args.insert(args.begin(), "tife");
  std::ostringstream out, err;
  const int code = tife::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Eight-unit fixture in the layout of the real building export.
std::filesystem::path building_fixture(const std::filesystem::path& dir) {
  const auto path = dir / "building.csv";
  std::ofstream out(path);
  out << "Date";
  for (int u = 1; u <= 8; ++u) out << ",z" << (u + 2) / 3 << "_ac" << u << "(kW)";
  out << '\n';
  const auto start = tife::parse_timestamp("2019-07-01 00:00:00");
  for (int m = 0; m < 60 * 24 * 4; m += 15) {  // 4 days at 15-minute resolution
    out << tife::format_timestamp(start + m * 60);
    for (int u = 1; u <= 8; ++u) {
      const int hour = (m / 60) % 24;
      out << ',';
      if (!(u == 3 && m == 120)) out << (hour >= 8 && hour < 18 ? 1.0 + 0.1 * u : 0.05 * u);
    }
    out << '\n';
  }
  return path;
}

}  // namespace

TEST_CASE("generate") {
  const auto dir = oracle::temp_dir("cli_gen");
  const auto d1 = (dir / "d1.csv").string();
  const auto r = tife_run({"generate", "data1", "--hours", "8760", "--out", d1});
  CHECK(r.code == 0);
  const auto s = tife::load_csv(d1);
  CHECK(s.length() == 8760);
  CHECK(s.features() == 1);
  CHECK(s.values(48, 0) == 1.5);

  const auto d2 = (dir / "d2.csv").string();
  CHECK(tife_run({"generate", "data2", "--weeks", "52", "--swap-day", "7", "--out", d2}).code == 0);
  CHECK(tife::load_csv(d2).features() == 2);

  const auto bad = tife_run({"generate", "data1", "--hours", "100", "--out", d1});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("168") != std::string::npos);
  CHECK(tife_run({"generate", "data3", "--out", d1}).code == 1);
  CHECK(tife_run({"generate", "data1"}).code == 1);
  CHECK(tife_run({}).code == 1);
  CHECK(tife_run({"--help"}).code == 0);
}

TEST_CASE("train, detect, attnmap, reconstruct") {
  const auto dir = oracle::temp_dir("cli_pipeline");
  const auto d2 = (dir / "d2.csv").string();
  REQUIRE(tife_run({"generate", "data2", "--weeks", "4", "--swap-day", "9", "--out", d2}).code == 0);

  const std::vector<std::string> train = {"train", "-i", d2, "--T", "48", "--da", "4", "--l", "3",
                                          "--batch", "8", "--epochs", "4", "--seed", "2"};
  auto with = [](std::vector<std::string> base, std::initializer_list<std::string> extra) {
    base.insert(base.end(), extra);
    return base;
  };
  const auto m1 = (dir / "m1.bin").string(), m2 = (dir / "m2.bin").string();
  const auto l1 = (dir / "l1.csv").string(), l2 = (dir / "l2.csv").string();
  const auto r1 = tife_run(with(train, {"-m", m1, "--loss-csv", l1}));
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("final_loss=") != std::string::npos);
  REQUIRE(tife_run(with(train, {"-m", m2, "--loss-csv", l2})).code == 0);
  CHECK(slurp(m1) == slurp(m2));
  CHECK(slurp(l1) == slurp(l2));
  CHECK(slurp(l1).rfind("epoch,loss\n1,", 0) == 0);

  const auto model = tife::load_model(m1);
  CHECK(model.dims == tife::ModelDims{48, 2, 4, 3});
  CHECK(model.scale.max == std::vector<double>{1.0, 1.0});

  const auto report = (dir / "report.csv").string();
  const auto det = tife_run({"detect", "-i", d2, "-m", m1, "--stride", "12", "-o", report});
  CHECK(det.code == 0);
  CHECK(det.out.find("flagged=") != std::string::npos);
  CHECK(slurp(report).rfind("# threshold=", 0) == 0);

  const auto d1 = (dir / "d1.csv").string();
  REQUIRE(tife_run({"generate", "data1", "--hours", "200", "--out", d1}).code == 0);
  const auto mismatch = tife_run({"detect", "-i", d1, "-m", m1, "-o", report});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("N=1") != std::string::npos);
  CHECK(mismatch.err.find("N=2") != std::string::npos);

  const auto prefix = (dir / "w0").string();
  CHECK(tife_run({"attnmap", "-i", d2, "-m", m1, "--window", "0", "-o", prefix}).code == 0);
  for (const char* suffix : {"_time.csv", "_feature.csv", "_time.pgm", "_feature.pgm"})
    CHECK(std::filesystem::exists(prefix + suffix));
  CHECK(tife::read_matrix_csv(prefix + "_time.csv").rows() == 48);
  CHECK(tife_run({"attnmap", "-i", d2, "-m", m1, "--window", "999", "-o", prefix}).code != 0);

  const auto rec = (dir / "rec.csv").string();
  CHECK(tife_run({"reconstruct", "-i", d2, "-m", m1, "-o", rec}).code == 0);
  std::ifstream in(rec);
  std::string header;
  std::getline(in, header);
  CHECK(header == "time_index,timestamp,ac1_original,ac1_reconstructed,ac2_original,ac2_reconstructed");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 672);

  const auto plain = (dir / "plain.bin").string();
  CHECK(tife_run(with(train, {"-m", plain, "--no-attention"})).code == 0);
  CHECK_FALSE(tife::load_model(plain).has_attention());
}

TEST_CASE("reconstruct with an identity model recovers the input") {
  const auto dir = oracle::temp_dir("cli_identity");
  const auto d2 = (dir / "d2.csv").string();
  REQUIRE(tife_run({"generate", "data2", "--weeks", "4", "--out", d2}).code == 0);
  auto m = tife::init_params(0, {24, 2, 1, 2}, false);
  m.ae = {tife::Matrix::identity(2), tife::Matrix(1, 2), tife::Matrix::identity(2), tife::Matrix(1, 2)};
  m.scale = {{0.0, 0.0}, {1.0, 1.0}};
  tife::save_model(m, dir / "id.bin");
  const auto rec = (dir / "rec.csv").string();
  REQUIRE(tife_run({"reconstruct", "-i", d2, "-m", (dir / "id.bin").string(), "-o", rec}).code == 0);
  std::ifstream in(rec);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> cells;
    std::stringstream ss(line.substr(line.find(',', line.find(',') + 1) + 1));
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(std::stod(c));
    REQUIRE(cells.size() == 4);
    CHECK(std::abs(cells[0] - cells[1]) <= 1e-9);
    CHECK(std::abs(cells[2] - cells[3]) <= 1e-9);
  }
  const auto det = tife_run({"detect", "-i", d2, "-m", (dir / "id.bin").string(), "-o", (dir / "r.csv").string()});
  CHECK(det.out.find("flagged=0") != std::string::npos);
}

TEST_CASE("eight-feature building export") {
  const auto dir = oracle::temp_dir("cli_building");
  const auto csv = building_fixture(dir).string();
  const auto s = tife::ingest_csv(csv);
  CHECK(s.features() == 8);
  CHECK(s.step == 3600);
  CHECK(s.length() == 96);
  CHECK_FALSE(s.has_missing());

  const auto model = (dir / "m.bin").string();
  REQUIRE(tife_run({"train", "-i", csv, "--T", "24", "--da", "4", "--l", "4", "--epochs", "2", "-m", model}).code == 0);
  const auto prefix = (dir / "mean").string();
  REQUIRE(tife_run({"attnmap", "-i", csv, "-m", model, "--mean", "--stride", "12", "-o", prefix}).code == 0);
  const auto fmap = tife::read_matrix_csv(prefix + "_feature.csv");
  CHECK(fmap.rows() == 8);
  CHECK(fmap.cols() == 8);
}

TEST_CASE("config file supplies defaults that flags override") {
  const auto dir = oracle::temp_dir("cli_config");
  const auto d2 = (dir / "d2.csv").string();
  REQUIRE(tife_run({"generate", "data2", "--weeks", "4", "--out", d2}).code == 0);
  std::ofstream(dir / "train.cfg") << "# Data-II style\nT = 48\nda=2\nl=2\nepochs=1\n";
  const auto m = (dir / "m.bin").string();
  const auto cfg = (dir / "train.cfg").string();
  REQUIRE(tife_run({"train", "-i", d2, "--config", cfg, "-m", m}).code == 0);
  CHECK(tife::load_model(m).dims == tife::ModelDims{48, 2, 2, 2});
  REQUIRE(tife_run({"train", "-i", d2, "--config", cfg, "--T", "24", "-m", m}).code == 0);
  CHECK(tife::load_model(m).dims == tife::ModelDims{24, 2, 2, 2});
  std::ofstream(dir / "bad.cfg") << "no equals sign\n";
  CHECK(tife_run({"train", "-i", d2, "--config", (dir / "bad.cfg").string(), "-m", m}).code == 1);
}

TEST_CASE("gradcheck command") {
  const auto ok = tife_run({"gradcheck"});
  CHECK(ok.code == 0);
  for (const char* block : {"block=f ", "block=g ", "block=h ", "block=encoder ", "block=decoder "})
    CHECK(ok.out.find(block) != std::string::npos);
  CHECK(tife_run({"gradcheck"}).out == ok.out);
  CHECK(tife_run({"gradcheck", "--tol", "1e-12"}).code != 0);
  CHECK(tife_run({"gradcheck", "--T", "40", "--N", "2"}).code == 1);
}
