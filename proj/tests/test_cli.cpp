#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include "blockforge/blockforge.h"
#include "test_helpers.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(BFC_BINARY_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("gen is deterministic and byte-identical to the library call") {
  bft::TempDir tmp("cli_gen");
  const std::string a = tmp.path("a.xyzf");
  const std::string b = tmp.path("b.xyzf");
  REQUIRE(run("gen --count 8 --seed 7 --min-atoms 5 --max-atoms 7 --box 3.2 --out " + a) == 0);
  REQUIRE(run("gen --count 8 --seed 7 --min-atoms 5 --max-atoms 7 --box 3.2 --out " + b) == 0);
  CHECK(bft::read_file(a) == bft::read_file(b));
  CHECK(std::filesystem::exists(a + ".manifest.json"));

  // The same options through the C API reproduce the CLI output bytes.
  bf_gen_config g;
  bf_gen_config_default(&g);
  g.count = 8;
  g.seed = 7;
  g.min_atoms = 5;
  g.max_atoms = 7;
  g.box_size = 3.2;
  bf_dataset* ds = nullptr;
  REQUIRE(bf_dataset_generate(&g, &ds) == BF_OK);
  const std::string c = tmp.path("c.xyzf");
  REQUIRE(bf_dataset_write(ds, c.c_str()) == BF_OK);
  bf_dataset_free(ds);
  CHECK(bft::read_file(a) == bft::read_file(c));
}

TEST_CASE("pipeline: gen, pretrain, relevance, prune, distill, finetune, eval, bench") {
  bft::TempDir tmp("cli_pipe");
  const std::string data = tmp.path("up.xyzf");
  REQUIRE(run("gen --count 40 --seed 3 --min-atoms 5 --max-atoms 7 --box 3.2 --out " + data) == 0);

  const std::string teacher = tmp.path("t.ckpt");
  REQUIRE(run("pretrain --data " + data + " --out " + teacher +
              " --blocks 3 --width 8 --edge-width 6 --rbf 4 --mlp-layers 2 --steps 15 --batch 4 "
              "--seed 1") == 0);
  CHECK(std::filesystem::exists(teacher));
  CHECK(std::filesystem::exists(teacher + ".log.csv"));
  CHECK(std::filesystem::exists(teacher + ".manifest.json"));

  const std::string rel = tmp.path("rel.csv");
  REQUIRE(run("relevance --in " + teacher + " --data " + data + " --samples 8 --out " + rel) == 0);
  CHECK(bft::read_file(rel).find("block_index,label,score") == 0);

  const std::string student = tmp.path("s.ckpt");
  REQUIRE(run("prune --in " + teacher + " --blocks 2 --strategy sliced --out " + student) == 0);
  CHECK(std::filesystem::exists(student));

  const std::string ablated = tmp.path("a.ckpt");
  REQUIRE(run("ablate --in " + teacher + " --block 1 --strategy sliced --out " + ablated) == 0);

  const std::string distilled = tmp.path("kd.ckpt");
  REQUIRE(run("distill --teacher " + teacher + " --in " + student + " --data " + data +
              " --lambda 1 --kd-terms out,n2n,e2e,mlp:1 --data-fraction 0.5 --steps 10 --batch 4 "
              "--out " + distilled) == 0);

  const std::string tuned = tmp.path("ft.ckpt");
  const std::string metrics = tmp.path("metrics.csv");
  REQUIRE(run("finetune --in " + distilled + " --data " + data + " --steps 10 --batch 4 --out " +
              tuned + " --metrics " + metrics) == 0);
  CHECK(bft::read_file(metrics).find("split,force_mae") == 0);

  REQUIRE(run("eval --in " + tuned + " --data " + data + " --split val") == 0);
  REQUIRE(run("bench --in " + tuned + " --data " + data + " --passes 3") == 0);

  const std::string scratch_out = tmp.path("scratch.ckpt");
  REQUIRE(run("scratch --data " + data + " --blocks 2 --width 8 --edge-width 6 --rbf 4 "
              "--mlp-layers 2 --steps 10 --batch 4 --out " + scratch_out) == 0);
}

TEST_CASE("usage and runtime failures use distinct exit codes") {
  bft::TempDir tmp("cli_err");
  CHECK(run("prune --in nowhere.ckpt") == 1);            // missing required --out/--blocks
  CHECK(run("definitely-not-a-subcommand") == 1);
  CHECK(run("eval --in nowhere.ckpt --data nowhere.xyzf") == 2);  // runtime: unreadable paths
  const std::string data = tmp.path("d.xyzf");
  REQUIRE(run("gen --count 5 --seed 1 --min-atoms 5 --max-atoms 6 --box 3.2 --out " + data) == 0);
  CHECK(run("eval --in " + data + " --data " + data) == 2);  // dataset is not a checkpoint
}

TEST_CASE("sweep produces the four report CSVs") {
  bft::TempDir tmp("cli_sweep");
  const std::string dir = tmp.root();
  REQUIRE(run("gen --count 40 --seed 5 --min-atoms 5 --max-atoms 7 --box 3.2 --out " + dir +
              "/up.xyzf") == 0);
  REQUIRE(run("gen --count 40 --seed 6 --min-atoms 5 --max-atoms 7 --box 3.2 --shift --out " +
              dir + "/down.xyzf") == 0);
  const std::string teacher = tmp.path("t.ckpt");
  REQUIRE(run("pretrain --data " + dir + "/up.xyzf --out " + teacher +
              " --blocks 4 --width 8 --edge-width 6 --rbf 4 --mlp-layers 2 --steps 10 --batch 4") ==
          0);
  const std::string out = tmp.path("results");
  REQUIRE(run("sweep --teacher " + teacher + " --data-dir " + dir + " --out " + out +
              " --finetune-steps 4 --kd-steps 4 --batch 4 --figure4-seconds 0.3 "
              "--bench-passes 3") == 0);
  for (const char* name : {"table1.csv", "figure3.csv", "table2.csv", "figure4.csv"})
    CHECK(std::filesystem::exists(std::filesystem::path(out) / name));
  CHECK(std::filesystem::exists(std::filesystem::path(out) / "run_manifest.json"));

  const std::string table2 = bft::read_file((std::filesystem::path(out) / "table2.csv").string());
  CHECK(table2.find("blocks,throughput,throughput_delta,flops,flops_delta,params,params_pct_delta") == 0);
  const std::string figure4 = bft::read_file((std::filesystem::path(out) / "figure4.csv").string());
  CHECK(figure4.find("blocks,wall_clock_s,val_force_mae") == 0);
}
