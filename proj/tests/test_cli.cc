/*
 * Copyright 2026 The histpolicy Authors.
 *
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

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "histpolicy/runner.h"
#include "test_util.h"

namespace histpolicy {
namespace {

using testing::scratch_dir;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HISTPOLICY_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump(2);
}

TEST(Cli, GenerateExperimentAndReport) {
  const auto dir = scratch_dir("cli_ok");
  GeneratorConfig gen;
  gen.n_patients = 40;
  gen.num_actions = 3;
  gen.min_stages = gen.max_stages = 3;
  write_json(dir / "gen.json", generator_config_to_json(gen));
  ASSERT_EQ(run_cli("generate --config " + (dir / "gen.json").string() + " --out " +
                    (dir / "data").string()),
            0);
  for (const char* f : {"episodes.jsonl", "oracle.csv", "schema.json", "generator.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / f)) << f;
  }
  write_json(dir / "exp.json", {{"data", {{"path", "data/episodes.jsonl"}, {"schema", "data/schema.json"}}},
                                {"states", "standard"},
                                {"models", {"lr"}},
                                {"n_splits", 1},
                                {"bootstrap", 20}});
  ASSERT_EQ(run_cli("experiment --config " + (dir / "exp.json").string() + " --out " +
                    (dir / "out").string() + " --seed 3"),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "results.csv"));
  EXPECT_EQ(run_cli("report --in " + (dir / "out").string() + " --out " + (dir / "again").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "again" / "metrics.csv"));
  std::filesystem::path bundle;
  for (const auto& e : std::filesystem::directory_iterator(dir / "out" / "models")) bundle = e.path();
  EXPECT_EQ(run_cli("ope --model " + bundle.string() + " --data " +
                    (dir / "data" / "episodes.jsonl").string() + " --out " + (dir / "ope").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "ope" / "ope_curve.svg"));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli_err");
  EXPECT_EQ(run_cli("experiment --config " + (dir / "missing.json").string()), 1);
  write_json(dir / "bad.json", {{"data", {{"generator", {}}}}, {"n_split", 2}});
  EXPECT_EQ(run_cli("experiment --config " + (dir / "bad.json").string()), 1);
  write_json(dir / "schema.json", schema_to_json(testing::three_action_schema()));
  write_json(dir / "nodata.json",
             {{"data", {{"path", "absent.jsonl"}, {"schema", "schema.json"}}}});
  EXPECT_EQ(run_cli("experiment --config " + (dir / "nodata.json").string()), 2);
  std::ofstream(dir / "broken.jsonl") << "{\"patient_id\": \n";
  write_json(dir / "broken.json",
             {{"data", {{"path", "broken.jsonl"}, {"schema", "schema.json"}}}});
  EXPECT_EQ(run_cli("experiment --config " + (dir / "broken.json").string()), 2);
  EXPECT_EQ(run_cli("no-such-command"), 1);
}

}  // namespace
}  // namespace histpolicy
