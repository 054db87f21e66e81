// Copyright 2026 The GTFC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the installed command-line tool end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

#include "core/serialize.hpp"
#include "frontend/wav.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "gtfc_cli_test"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    // A small two-speaker corpus shared by the tests.
    const auto r = run("--seed 3 synth --out corpus --speakers 3 --train-per-speaker 4 "
                       "--test-per-speaker 2 --trials 6");
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(run("extract --wav-dir corpus/train --manifest-out train.lst --feat-dir ft").code, 0);
    ASSERT_EQ(run("extract --wav-dir corpus/test --manifest-out test.lst --feat-dir fe").code, 0);
  }

  static void TearDownTestSuite() { fs::remove_all(root()); }

  static Outcome run(const std::string& args, const std::string& env = "") {
    const fs::path out = root() / "stdout.txt", err = root() / "stderr.txt";
    const std::string cmd = "cd '" + root().string() + "' && " + env + " '" + GTFC_CLI_PATH + "' " + args +
                            " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  static std::string train_flags() {
    return "--set epochs=1 --set chunk_min=40 --set chunk_max=60 --set batch_size=4 "
           "--set val_fraction=0 --set lr=0.01";
  }
};

TEST_F(Cli, ExtractEmptyDirectory) {
  fs::create_directories(root() / "empty");
  const auto r = run("extract --wav-dir empty --manifest-out empty.lst --feat-dir ef");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root() / "empty.lst"));
  EXPECT_EQ(fs::file_size(root() / "empty.lst"), 0u);
}

TEST_F(Cli, ExtractUnreadableDirectory) {
  EXPECT_EQ(run("extract --wav-dir no_such_dir --manifest-out x.lst --feat-dir xf").code, 2);
}

TEST_F(Cli, ExtractOneSecondAndCorruptFile) {
  const fs::path dir = root() / "mixed" / "spkA";
  fs::create_directories(dir);
  std::vector<double> tone(16000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.3 * std::sin(0.05 * double(i));
  gtfc::frontend::write_wav(dir / "good.wav", 16000, tone);
  std::ofstream(dir / "bad.wav") << "RIFF but not really a wave file";
  const auto r = run("extract --wav-dir mixed --manifest-out mixed.lst --feat-dir mf");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.wav"), std::string::npos);
  const auto feats = gtfc::read_gtf1(root() / "mf" / "good.gtf");
  EXPECT_EQ(feats.shape(), (gtfc::Shape{98, 64}));
  EXPECT_EQ(slurp(root() / "mixed.lst"), "good\tspkA\tmf/good.gtf\t98\n");
}

TEST_F(Cli, TrainIsDeterministicAndEmbedsScore) {
  const std::string flags = train_flags();
  auto a = run("--seed 4 train --manifest train.lst --out ta --block c-gtfc --p 2 " + flags);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("initial_loss="), std::string::npos);
  ASSERT_EQ(run("--seed 4 train --manifest train.lst --out tb --block c-gtfc --p 2 " + flags).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(root() / "ta")) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(root() / "tb" / fs::relative(e.path(), root() / "ta")))
        << e.path();
  }

  ASSERT_EQ(run("embed --ckpt ta --manifest test.lst --out emb.txt").code, 0);
  std::ifstream is(root() / "emb.txt");
  std::string id;
  is >> id;
  std::ofstream(root() / "self.trials") << "1 " << id << ' ' << id << '\n';
  ASSERT_EQ(run("score --embeds emb.txt --trials self.trials --out self.scores").code, 0);
  std::istringstream row(slurp(root() / "self.scores"));
  std::string e1, e2;
  double s = 0;
  row >> e1 >> e2 >> s;
  EXPECT_NEAR(s, 1.0, 1e-12);

  // Embedding output does not depend on the worker count.
  ASSERT_EQ(run("embed --ckpt ta --manifest test.lst --out emb1.txt", "GTFC_NUM_THREADS=1").code, 0);
  ASSERT_EQ(run("embed --ckpt ta --manifest test.lst --out emb4.txt", "GTFC_NUM_THREADS=4").code, 0);
  EXPECT_EQ(slurp(root() / "emb1.txt"), slurp(root() / "emb.txt"));
  EXPECT_EQ(slurp(root() / "emb4.txt"), slurp(root() / "emb.txt"));

  std::ofstream(root() / "missing.trials") << "1 " << id << " nobody\n";
  const auto m = run("score --embeds emb.txt --trials missing.trials --out m.scores");
  EXPECT_EQ(m.code, 5);
  EXPECT_NE(m.err.find("nobody"), std::string::npos);
}

TEST_F(Cli, TrainGroupMismatchAndNonFinite) {
  const auto g = run("train --manifest train.lst --out tg --block tf-gtfc --groups 7 " + train_flags());
  EXPECT_EQ(g.code, 4);
  EXPECT_NE(g.err.find("GroupMismatch"), std::string::npos);
  const auto n = run("train --manifest train.lst --out tn --block none " + train_flags() +
                     " --lr 1e300 --epochs 3");
  EXPECT_EQ(n.code, 3) << n.err;
}

TEST_F(Cli, EvalFormat) {
  std::ofstream(root() / "perfect.trials") << "1 a b\n0 a c\n1 d e\n0 d f\n";
  std::ofstream(root() / "perfect.scores") << "a b 0.9\na c 0.1\nd e 0.8\nd f 0.2\n";
  const auto r = run("eval --scores perfect.scores --trials perfect.trials");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "EER=0.00% minDCF=0.0000\n");
  EXPECT_TRUE(std::regex_search(r.out, std::regex("EER=([0-9.]+)% minDCF=([0-9.]+)")));
}

TEST_F(Cli, Gradcheck) {
  EXPECT_EQ(run("gradcheck --block c-gtfc --p 2").code, 0);
  EXPECT_EQ(run("gradcheck --block se").code, 0);
  const auto tf = run("gradcheck --block tf-gtfc --groups 8");
  EXPECT_EQ(tf.code, 0);
  EXPECT_NE(tf.out.find("max_rel_error="), std::string::npos);
  EXPECT_EQ(run("gradcheck --block tf-gtfc --groups 7").code, 4);
  const auto fail = run("gradcheck --block c-gtfc --set tol=1e-30");
  EXPECT_EQ(fail.code, 6);
  EXPECT_NE(fail.err.find("worst coordinate"), std::string::npos);
}

TEST_F(Cli, Fuse) {
  std::ofstream(root() / "a.scores") << "a b 0.2\nc d -0.5\n";
  std::ofstream(root() / "b.scores") << "a b 0.4\nc d 0.5\n";
  std::ofstream(root() / "x.scores") << "q r 0.4\ns t 0.5\n";
  ASSERT_EQ(run("fuse --scores-a a.scores --scores-b a.scores --out aa.scores").code, 0);
  EXPECT_EQ(slurp(root() / "aa.scores"), slurp(root() / "a.scores"));
  ASSERT_EQ(run("fuse --scores-a a.scores --scores-b b.scores --out ab.scores").code, 0);
  std::istringstream is(slurp(root() / "ab.scores"));
  std::string e, t;
  double s = 0;
  is >> e >> t >> s;
  EXPECT_NEAR(s, 0.3, 1e-15);
  EXPECT_EQ(run("fuse --scores-a a.scores --scores-b x.scores --out ax.scores").code, 5);
}

TEST_F(Cli, ConfigFileAndUsage) {
  std::ofstream(root() / "bad.cfg") << "# comment\nnot_a_key = 3\n";
  EXPECT_EQ(run("--config bad.cfg gradcheck --block se").code, 64);
  std::ofstream(root() / "good.cfg") << "[gradcheck]\np = 1\ngroups = 7\n";
  // The flag overrides the file.
  EXPECT_EQ(run("--config good.cfg gradcheck --block tf-gtfc").code, 4);
  EXPECT_EQ(run("--config good.cfg gradcheck --block tf-gtfc --groups 4").code, 0);
  EXPECT_EQ(run("gradcheck").code, 64);
  EXPECT_EQ(run("--help").code, 0);
}

}  // namespace
