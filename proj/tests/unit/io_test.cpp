#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tipgan/hash.hpp"
#include "tipgan/manifest.hpp"
#include "tipgan/param_file.hpp"

using namespace tipgan;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tipgan_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Hash, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Hash, FileMatchesContent) {
  const fs::path d = scratch("hash");
  write(d / "a.txt", "abc");
  EXPECT_EQ(sha256_file(d / "a.txt"), sha256_hex("abc"));
  EXPECT_THROW(sha256_file(d / "missing"), Error);
}

TEST(ParamFile, RoundTripIsExact) {
  ParamSet ps;
  ps.params.fw_n = 0.1 + 0.2;
  ps.init_template.t_d = 1.0 / 3.0;
  std::stringstream buf;
  write_param_set(buf, ps);
  const ParamSet back = read_param_set(io::KeyValues::parse(buf));
  std::stringstream again;
  write_param_set(again, back);
  EXPECT_EQ(buf.str(), again.str());
  EXPECT_EQ(back.params.fw_n, ps.params.fw_n);
  EXPECT_EQ(back.init_template, ps.init_template);
}

TEST(ParamFile, ShippedFileMatchesBuiltIn) {
  const ParamSet shipped = load_param_set(fs::path(TIPGAN_DATA_DIR) / "calibrated_params.txt");
  std::stringstream a, b;
  write_param_set(a, shipped);
  write_param_set(b, ParamSet{});
  EXPECT_EQ(a.str(), b.str());
}

TEST(ParamFile, RejectsUnknownKeyAndBadVersion) {
  std::istringstream unknown("format_version = 1\nbogus = 3\n");
  EXPECT_THROW(read_param_set(io::KeyValues::parse(unknown)), Error);
  std::istringstream version("format_version = 7\n");
  EXPECT_THROW(read_param_set(io::KeyValues::parse(version)), Error);
  std::istringstream bad("m_ek = fast\n");
  try {
    read_param_set(io::KeyValues::parse(bad));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}

TEST(ParamFile, RejectsNonPhysicalValues) {
  std::istringstream in("area_n = -1\n");
  EXPECT_THROW(read_param_set(io::KeyValues::parse(in)), Error);
}

TEST(KeyValues, SectionsAndComments) {
  std::istringstream in("# top\na = 1\n[train]\nsteps = 20 \n\n");
  const auto kv = io::KeyValues::parse(in);
  EXPECT_EQ(kv.get_int("a", 0), 1);
  EXPECT_EQ(kv.get_int("train.steps", 0), 20);
  std::istringstream broken("no equals sign\n");
  EXPECT_THROW(io::KeyValues::parse(broken), Error);
}

TEST(Manifest, DetectsEditedInput) {
  const fs::path d = scratch("manifest");
  write(d / "out.csv", "x\n1\n");
  {
    ManifestFile mf(d / "manifest.json");
    RunManifest m;
    m.subcommand = "dataset/train";
    m.add_output(d / "out.csv");
    mf.record(m);
    mf.save();
  }
  ManifestFile mf(d / "manifest.json");
  EXPECT_NO_THROW(mf.verify_input(d / "out.csv"));
  write(d / "out.csv", "x\n2\n");
  try {
    mf.verify_input(d / "out.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::HashMismatch);
  }
  try {
    mf.verify_input(d / "nope.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingArtifact);
  }
}

TEST(Manifest, SaveIsDeterministic) {
  const fs::path d = scratch("manifest_det");
  write(d / "a", "1");
  auto build = [&](const fs::path& out) {
    ManifestFile mf(out);
    RunManifest m;
    m.subcommand = "atlas";
    m.seeds = {3};
    m.add_input(d / "a");
    mf.record(m);
    mf.save();
  };
  build(d / "m1.json");
  build(d / "m2.json");
  EXPECT_EQ(sha256_file(d / "m1.json"), sha256_file(d / "m2.json"));
}

TEST(Manifest, RejectsUnknownVersion) {
  const fs::path d = scratch("manifest_ver");
  write(d / "manifest.json", R"({"format_version": 5, "runs": {}})");
  EXPECT_THROW(ManifestFile(d / "manifest.json"), Error);
}
