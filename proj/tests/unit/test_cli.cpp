/*
 * Copyright 2026 The FPA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Drives the fpa binary end to end and checks exit codes and output files.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/temp_dir.hpp"

namespace {

namespace fs = std::filesystem;
using fpa::testing_util::TempDir;
using nlohmann::json;

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

int RunFpa(const std::string& args) {
  const std::string cmd =
      std::string(FPA_CLI_PATH) + " " + args + " --quiet > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Data rows of a CSV file, skipping the provenance comment and the header.
std::vector<std::vector<std::string>> CsvRows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Independent reader for the saliency archive layout.
struct Archive {
  json header;
  std::vector<float> values;
};

Archive ReadArchive(const fs::path& p) {
  const std::string bytes = ReadAll(p);
  Archive a;
  EXPECT_EQ(bytes.substr(0, 8), "FPASAL01");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) {
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 + i]))
           << (8 * i);
  }
  a.header = json::parse(bytes.substr(16, len));
  const std::size_t payload = bytes.size() - 16 - len;
  a.values.resize(payload / 4);
  std::memcpy(a.values.data(), bytes.data() + 16 + len, payload);
  return a;
}

constexpr std::size_t kSamples = 6;

constexpr const char* kConfig = R"({
  "dataset": {"train_samples": 96, "test_samples": 24},
  "model": {"layers": [{"type": "conv", "out_channels": 2, "kernel": 3,
                        "stride": 1, "padding": 1},
                       {"type": "relu"}, {"type": "pool", "window": 4},
                       {"type": "flatten"}, {"type": "dense", "units": 10}]},
  "train": {"epochs": 2, "batch_size": 16, "lr_drop_epochs": [1]},
  "eval": {"samples": 6, "ig_steps": 8, "sg_samples": 3,
           "bootstrap_resamples": 40}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = (dir_.path() / "cfg.json").string();
    WriteText(config_, kConfig);
  }
  std::string Out(const std::string& name) const {
    return (dir_.path() / name).string();
  }
  std::string Train(const std::string& out, const std::string& arm) {
    EXPECT_EQ(RunFpa("train --config " + config_ + " --out " + Out(out) +
                  " --arm " + arm),
              0);
    return Out(out) + "/checkpoint_" + arm + ".json";
  }

  TempDir dir_;
  std::string config_;
};

TEST_F(Cli, TrainIsDeterministicAndArmsDiffer) {
  const std::string a = Train("a", "none");
  const std::string b = Train("b", "none");
  const std::string f = Train("a", "fpa");
  ASSERT_TRUE(fs::exists(a));
  EXPECT_EQ(ReadAll(a), ReadAll(b));
  EXPECT_EQ(ReadAll(Out("a") + "/metrics_none.csv"),
            ReadAll(Out("b") + "/metrics_none.csv"));
  EXPECT_EQ(CsvRows(Out("a") + "/metrics_none.csv").size(), 2u);

  const json ja = json::parse(ReadAll(a));
  const json jf = json::parse(ReadAll(f));
  EXPECT_EQ(jf["arm"], "fpa");
  EXPECT_EQ(ja["seeds"], jf["seeds"]);
  EXPECT_NE(ja["params"], jf["params"]);
}

TEST_F(Cli, SaliencyCurvesAndReport) {
  const std::string ck = Train("o", "none");
  ASSERT_EQ(RunFpa("saliency --config " + config_ + " --out " + Out("o") +
                " --checkpoint " + ck),
            0);
  const std::string archive = Out("o") + "/saliency_none.fsal";
  ASSERT_EQ(RunFpa("saliency --config " + config_ + " --out " + Out("o2") +
                " --checkpoint " + ck),
            0);
  EXPECT_EQ(ReadAll(archive), ReadAll(Out("o2") + "/saliency_none.fsal"));

  const Archive a = ReadArchive(archive);
  const std::vector<std::string> ids = a.header["estimators"];
  EXPECT_EQ(ids.size(), 10u);
  EXPECT_EQ(ids.front(), "random");
  ASSERT_EQ(a.header["sample_ids"].size(), kSamples);
  const std::size_t hw = 28 * 28;
  ASSERT_EQ(a.values.size(), kSamples * ids.size() * hw);
  for (std::size_t s = 0; s < kSamples; ++s) {
    for (std::size_t e = 0; e < ids.size(); ++e) {
      if (ids[e] != "sq-sg_sum") continue;
      for (std::size_t i = 0; i < hw; ++i) {
        EXPECT_GE(a.values[(s * ids.size() + e) * hw + i], 0.0f);
      }
    }
  }

  ASSERT_EQ(RunFpa("curves --config " + config_ + " --out " + Out("o") +
                " --checkpoint " + ck + " --archive " + archive),
            0);
  const auto curves = CsvRows(Out("o") + "/curves_none.csv");
  EXPECT_EQ(curves.size(), 51u * 2u * ids.size());
  for (const auto& row : curves) {
    if (row[0] == "0") {
      EXPECT_DOUBLE_EQ(std::stod(row[1]), 1.0);
    }
  }
  const json fid = json::parse(ReadAll(Out("o") + "/fidelity_none.json"));
  ASSERT_EQ(fid["results"].size(), ids.size());
  for (const json& r : fid["results"]) {
    EXPECT_LE(r["ci_low"].get<double>(), r["area"].get<double>());
    EXPECT_GE(r["ci_high"].get<double>(), r["area"].get<double>());
  }
  const std::string persample = Out("o") + "/persample_none.csv";
  EXPECT_EQ(CsvRows(persample).size(), kSamples * ids.size() * 2u);

  // A different sample count than the archive was built with.
  EXPECT_EQ(RunFpa("curves --config " + config_ + " --out " + Out("o") +
                " --checkpoint " + ck + " --archive " + archive +
                " --samples 4"),
            3);

  const std::string report = "report --archive " + archive + " --curves " +
                             persample + " --sample 1 --estimators ig_sum";
  ASSERT_EQ(RunFpa(report + " --percentile 100 --out " + Out("r100")), 0);
  for (const auto& row : CsvRows(Out("r100") + "/heatmap_sample1_ig_sum.csv")) {
    for (const std::string& v : row) EXPECT_EQ(std::stod(v), 0.0);
  }
  ASSERT_EQ(RunFpa(report + " --percentile 98 --out " + Out("r98")), 0);
  std::size_t pos = 0, neg = 0;
  // The heatmap has no header line, so every row is data.
  std::ifstream heat(Out("r98") + "/heatmap_sample1_ig_sum.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(heat, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rows;
    std::stringstream ss(line);
    std::string v;
    while (std::getline(ss, v, ',')) {
      const double x = std::stod(v);
      pos += x > 0;
      neg += x < 0;
    }
  }
  EXPECT_EQ(rows, 28u);
  EXPECT_LE(pos, static_cast<std::size_t>(0.02 * hw));
  EXPECT_LE(neg, static_cast<std::size_t>(0.02 * hw));
  EXPECT_EQ(CsvRows(Out("r98") + "/series_sample1_ig_sum.csv").size(), hw);
  EXPECT_TRUE(fs::exists(Out("r98") + "/report_sample1.json"));
  EXPECT_EQ(RunFpa(report + " --percentile 40 --out " + Out("r40")), 2);
  EXPECT_EQ(RunFpa(report + " --sample 999 --out " + Out("rx")), 2);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(RunFpa("bogus"), 2);
  EXPECT_EQ(RunFpa("train --config " + Out("missing.json")), 2);
  WriteText(Out("bad.json"), R"({"train": {"epochs": -1}})");
  EXPECT_EQ(RunFpa("train --config " + Out("bad.json") + " --out " + Out("x")), 2);
  WriteText(Out("syntax.json"), "{\"train\": ");
  EXPECT_EQ(RunFpa("train --config " + Out("syntax.json") + " --out " + Out("x")), 2);
  EXPECT_EQ(RunFpa("saliency --config " + config_ + " --out " + Out("x") +
                " --checkpoint " + Out("none.json")),
            3);
  WriteText(Out("diverge.json"), R"({
    "dataset": {"train_samples": 32, "test_samples": 8},
    "model": {"layers": [{"type": "flatten"}, {"type": "dense", "units": 10}]},
    "train": {"epochs": 2, "lr": 1e30, "momentum": 0.0}
  })");
  EXPECT_EQ(RunFpa("train --config " + Out("diverge.json") + " --out " + Out("d")), 4);
}

}  // namespace
