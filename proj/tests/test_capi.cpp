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

// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "gtfc/gtfc.h"

namespace fs = std::filesystem;

namespace {

TEST(CApi, StatusAndLastError) {
  EXPECT_STREQ(gtfc_status_name(GTFC_OK), "ok");
  EXPECT_STREQ(gtfc_status_name(GTFC_ERR_GROUP_MISMATCH), "group mismatch");
  gtfc_options* o = nullptr;
  ASSERT_EQ(gtfc_options_create(&o), GTFC_OK);
  EXPECT_STREQ(gtfc_last_error(), "");
  EXPECT_EQ(gtfc_options_set(o, "no_such_key", "1"), GTFC_ERR_CONFIG);
  EXPECT_NE(std::string(gtfc_last_error()).find("no_such_key"), std::string::npos);
  EXPECT_EQ(gtfc_options_set(o, nullptr, "1"), GTFC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(gtfc_options_set(o, "seed", "5"), GTFC_OK);
  EXPECT_STREQ(gtfc_last_error(), "");
  gtfc_options_free(o);
  gtfc_options_free(nullptr);
  gtfc_model_free(nullptr);
  gtfc_scores_free(nullptr);
}

TEST(CApi, LastErrorIsPerThread) {
  gtfc_options* o = nullptr;
  ASSERT_EQ(gtfc_options_create(&o), GTFC_OK);
  EXPECT_EQ(gtfc_options_set(o, "bogus", "1"), GTFC_ERR_CONFIG);
  std::string other = "unset";
  std::thread([&] { other = gtfc_last_error(); }).join();
  EXPECT_EQ(other, "");
  EXPECT_NE(std::string(gtfc_last_error()), "");
  gtfc_options_free(o);
}

TEST(CApi, ParamCountAndGradcheck) {
  gtfc_options* o = nullptr;
  ASSERT_EQ(gtfc_options_create(&o), GTFC_OK);
  std::size_t n = 0;
  // c-gtfc: C + HC + 2H + 2C with H = max(C/4, 4)
  ASSERT_EQ(gtfc_block_param_count("c-gtfc", 16, o, &n), GTFC_OK);
  EXPECT_EQ(n, 16u + 4 * 16 + 8 + 32);
  EXPECT_EQ(gtfc_block_param_count("mystery", 16, o, &n), GTFC_ERR_UNKNOWN_OPERATOR);

  gtfc_gradcheck_report rep{};
  ASSERT_EQ(gtfc_gradcheck("tf-gtfc", o, &rep), GTFC_OK);
  EXPECT_EQ(rep.passed, 1);
  EXPECT_LT(rep.max_rel_error, 1e-4);
  ASSERT_EQ(gtfc_options_set(o, "groups", "5"), GTFC_OK);
  EXPECT_EQ(gtfc_gradcheck("tf-gtfc", o, &rep), GTFC_ERR_GROUP_MISMATCH);
  gtfc_options_free(o);
}

TEST(CApi, ScoresLifecycle) {
  const fs::path dir = fs::temp_directory_path() / "gtfc_capi_test";
  fs::create_directories(dir);
  std::ofstream(dir / "t.txt") << "1 a b\n0 a c\n1 d e\n0 d f\n";
  std::ofstream(dir / "s.txt") << "a b 0.9\na c 0.3\nd e 0.2\nd f 0.1\n";
  gtfc_scores* s = nullptr;
  ASSERT_EQ(gtfc_scores_load((dir / "s.txt").c_str(), (dir / "t.txt").c_str(), &s), GTFC_OK);
  std::size_t count = 0;
  ASSERT_EQ(gtfc_scores_count(s, &count), GTFC_OK);
  EXPECT_EQ(count, 4u);
  double eer = -1, thr = 0, dcf = -1;
  ASSERT_EQ(gtfc_scores_eer(s, &eer, &thr), GTFC_OK);
  ASSERT_EQ(gtfc_scores_min_dcf(s, 0.01, 1, 1, &dcf), GTFC_OK);
  EXPECT_GE(eer, 0.0);
  EXPECT_LE(eer, 1.0);
  gtfc_scores* f = nullptr;
  ASSERT_EQ(gtfc_scores_fuse(s, s, 0.5, 0.5, &f), GTFC_OK);
  double eer_f = -1;
  ASSERT_EQ(gtfc_scores_eer(f, &eer_f, nullptr), GTFC_OK);
  EXPECT_EQ(eer_f, eer);
  ASSERT_EQ(gtfc_scores_write(f, (dir / "f.txt").c_str()), GTFC_OK);

  gtfc_scores* unlabeled = nullptr;
  ASSERT_EQ(gtfc_scores_load((dir / "s.txt").c_str(), nullptr, &unlabeled), GTFC_OK);
  EXPECT_EQ(gtfc_scores_eer(unlabeled, &eer, &thr), GTFC_ERR_DEGENERATE_SET);
  gtfc_scores* mixed = nullptr;
  EXPECT_EQ(gtfc_scores_fuse(s, unlabeled, 0.5, 0.5, &mixed), GTFC_ERR_TRIAL_MISMATCH);

  std::ofstream(dir / "short.txt") << "a b 0.9\n";
  gtfc_scores* partial = nullptr;
  EXPECT_EQ(gtfc_scores_load((dir / "short.txt").c_str(), (dir / "t.txt").c_str(), &partial),
            GTFC_ERR_TRIAL_MISMATCH);
  EXPECT_EQ(gtfc_scores_load((dir / "nope.txt").c_str(), nullptr, &partial), GTFC_ERR_IO);

  gtfc_scores_free(s);
  gtfc_scores_free(f);
  gtfc_scores_free(unlabeled);
  fs::remove_all(dir);
}

TEST(CApi, SynthTrainEmbed) {
  const fs::path dir = fs::temp_directory_path() / "gtfc_capi_model";
  fs::remove_all(dir);
  gtfc_options* o = nullptr;
  ASSERT_EQ(gtfc_options_create(&o), GTFC_OK);
  for (auto [k, v] : std::vector<std::pair<const char*, const char*>>{
           {"speakers", "2"}, {"train_per_speaker", "3"}, {"test_per_speaker", "2"},
           {"trials", "2"}, {"duration_s", "1.0"}, {"epochs", "1"}, {"chunk_min", "20"},
           {"chunk_max", "30"}, {"batch_size", "3"}, {"val_fraction", "0"}, {"block", "tf-gtfc"},
           {"precision", "f32"}}) {
    ASSERT_EQ(gtfc_options_set(o, k, v), GTFC_OK) << k;
  }
  std::size_t n_train = 0, n_test = 0, n_trials = 0;
  ASSERT_EQ(gtfc_synth((dir / "corpus").c_str(), o, &n_train, &n_test, &n_trials), GTFC_OK)
      << gtfc_last_error();
  EXPECT_EQ(n_train, 6u);
  std::size_t written = 0, failed = 0;
  ASSERT_EQ(gtfc_extract((dir / "corpus" / "train").c_str(), (dir / "train.lst").c_str(),
                         (dir / "feats").c_str(), o, nullptr, nullptr, &written, &failed),
            GTFC_OK);
  EXPECT_EQ(written, 6u);
  EXPECT_EQ(failed, 0u);
  gtfc_train_summary sum{};
  ASSERT_EQ(gtfc_train((dir / "train.lst").c_str(), (dir / "run").c_str(), o, nullptr, nullptr,
                       &sum),
            GTFC_OK)
      << gtfc_last_error();
  EXPECT_EQ(sum.num_speakers, 2u);
  EXPECT_EQ(sum.steps, 2u);

  gtfc_model* m = nullptr;
  ASSERT_EQ(gtfc_model_load((dir / "run").c_str(), &m), GTFC_OK) << gtfc_last_error();
  std::size_t in_dim = 0, emb_dim = 0, params = 0;
  ASSERT_EQ(gtfc_model_info(m, &in_dim, &emb_dim, &params), GTFC_OK);
  EXPECT_EQ(in_dim, 64u);
  EXPECT_EQ(emb_dim, 16u);
  EXPECT_EQ(params, sum.num_params);
  std::vector<double> feats(40 * 64, 0.25), out(emb_dim);
  for (std::size_t i = 0; i < feats.size(); ++i) feats[i] = std::sin(0.37 * double(i));
  ASSERT_EQ(gtfc_model_embed(m, feats.data(), 40, 64, out.data(), out.size()), GTFC_OK);
  std::vector<double> again(emb_dim);
  ASSERT_EQ(gtfc_model_embed(m, feats.data(), 40, 64, again.data(), again.size()), GTFC_OK);
  EXPECT_EQ(out, again);
  EXPECT_EQ(gtfc_model_embed(m, feats.data(), 4, 64, out.data(), out.size()), GTFC_ERR_TOO_SHORT);
  EXPECT_EQ(gtfc_model_embed(m, feats.data(), 40, 64, out.data(), 3), GTFC_ERR_INVALID_ARGUMENT);
  gtfc_model_free(m);
  EXPECT_EQ(gtfc_model_load((dir / "missing").c_str(), &m), GTFC_ERR_IO);
  gtfc_options_free(o);
  fs::remove_all(dir);
}

}  // namespace
