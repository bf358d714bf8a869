#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(FLOWGRAPH_TEST_WORKDIR) / "cli_test_work";

int run(const std::string& args) {
  const std::string cmd = std::string("FLOWGRAPH_LOG=warn \"") + FLOWGRAPH_CLI + "\" " + args + " 2>>\"" +
                          (kWork / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Every regular file under `dir`, as relative path -> contents.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

// Small trace so the suite stays fast.
const std::string kSmall =
    "--duration 7200 --normal-entities 60 --attack-entities 12 --rate 0.01 --epochs 40 --seed 3 --dataset syn ";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_F(Cli, RunAllProducesDeclaredFiles) {
  const auto out = kWork / "all";
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" run-all"), 0);
  for (const char* f : {"flows.csv", "graphs/manifest.csv", "graphs/snapshot_000000.graph",
                        "clusters/dbscan_0.2/manifest.csv", "clusters/dbscan_0.2/params.txt",
                        "clusters/dbscan_0.2/snapshot_000000.clustered", "clusters/dbscan_0.2/snapshot_000000.assign.csv",
                        "models/dbscan_0.2_gcn/model.txt", "models/dbscan_0.2_gcn/loss.csv",
                        "models/dbscan_0.2_gcn/metrics.csv", "report/syn_dbscan_0.2.csv",
                        "report/syn_dbscan_0.2_summary.csv", "report/syn_clustering_effects.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
}

TEST_F(Cli, StagesEqualRunAll) {
  const auto a = kWork / "a", b = kWork / "b";
  ASSERT_EQ(run(kSmall + "--out-dir \"" + a.string() + "\" run-all"), 0);
  for (const char* stage : {"synth", "graph", "cluster", "train", "report"})
    ASSERT_EQ(run(kSmall + "--jobs 3 --out-dir \"" + b.string() + "\" " + stage), 0) << stage;
  EXPECT_EQ(tree(a), tree(b));
}

TEST_F(Cli, GraphRerunIsByteIdentical) {
  const auto out = kWork / "g";
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" synth"), 0);
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" graph"), 0);
  const auto first = tree(out / "graphs");
  ASSERT_EQ(run(kSmall + "--jobs 4 --out-dir \"" + out.string() + "\" graph"), 0);
  EXPECT_EQ(tree(out / "graphs"), first);
  EXPECT_GT(first.size(), 1u);
}

TEST_F(Cli, ZeroEpsFails) {
  const auto out = kWork / "e";
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" synth"), 0);
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" graph"), 0);
  EXPECT_NE(run("--out-dir \"" + out.string() + "\" --eps 0 cluster"), 0);
  EXPECT_NE(run("--out-dir \"" + out.string() + "\" --width -5 graph"), 0);
  EXPECT_NE(run("--out-dir \"" + out.string() + "\" --algorithm kmeans cluster"), 0);
  EXPECT_NE(run("--out-dir \"" + (kWork / "missing").string() + "\" train"), 0);
  EXPECT_NE(run("--input /nonexistent/flows.csv graph"), 0);
  EXPECT_NE(run(""), 0);
  EXPECT_NE(slurp(kWork / "stderr.txt").find("eps must be > 0"), std::string::npos);
}

TEST_F(Cli, GridAndReport) {
  const auto out = kWork / "grid";
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" synth"), 0);
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" graph"), 0);
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" cluster --grid"), 0);
  ASSERT_EQ(run(kSmall + "--out-dir \"" + out.string() + "\" report"), 0);
  std::istringstream table(slurp(out / "report/syn_clustering_effects.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(table, line);
  EXPECT_EQ(line, "method,eps,clustered_normal,attack,share_percent");
  while (std::getline(table, line)) ++rows;
  EXPECT_EQ(rows, 7u);
}

TEST_F(Cli, ConfigFile) {
  const auto out = kWork / "cfg";
  {
    std::ofstream cfg(kWork / "run.toml");
    cfg << "out-dir = \"" << out.string() << "\"\nduration = 3600\nnormal-entities = 40\nattack-entities = 8\n"
        << "rate = 0.01\nepochs = 10\nvariant = \"cheb\"\nk = 2\nalgorithm = \"hdbscan\"\n";
  }
  ASSERT_EQ(run("--config \"" + (kWork / "run.toml").string() + "\" run-all"), 0);
  EXPECT_TRUE(fs::exists(out / "models/hdbscan_na_cheb_k2/model.txt"));
}
