/* Copyright 2026 The redflag authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Writes the synthetic demo corpus (three toy tasks + a response set) and a
// ready-to-run config next to it.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "redflag/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the synthetic demo corpus"};
  std::string out_dir = "data";
  std::uint64_t seed = 7;
  int examples = 96;
  int responses = 120;
  app.add_option("--out", out_dir, "output directory (default data/)");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--examples", examples, "records per task dataset");
  app.add_option("--responses", responses, "response count");
  CLI11_PARSE(app, argc, argv);

  try {
    redflag::synth::SynthConfig config;
    config.seed = seed;
    config.task_examples = examples;
    config.response_count = responses;
    const auto files = redflag::synth::write_synth_corpus(out_dir, config);

    nlohmann::json cfg = {
        {"seed", 7},
        {"threshold", 0.5},
        {"chunk_size", 50},
        {"reg_strength", 1.0},
        {"output_root", "runs"},
        {"encoder",
         {{"num_layers", 2},
          {"hidden_dim", 32},
          {"num_heads", 2},
          {"ff_dim", 64},
          {"max_positions", 224},
          {"dropout_p", 0.0},
          {"use_pooler", true}}},
        {"train",
         {{"lr", 1e-3},
          {"max_epochs", 12},
          {"patience", 5},
          {"max_tokens_per_batch", 2048},
          {"max_len", 64},
          {"test_fraction", 0.2},
          {"dev_fraction", 0.2},
          {"head_dropout_p", 0.0},
          {"vocab_min_count", 1}}},
        {"tasks",
         {{{"name", "forum"},
           {"kind", "classification"},
           {"labels", {"stormwatch", "gardening", "astronomy"}},
           {"path", "forum.jsonl"}},
          {{"name", "tone"},
           {"kind", "multilabel"},
           {"labels", {"gloom", "anger", "calm"}},
           {"path", "tone.jsonl"}},
          {{"name", "static"},
           {"kind", "multilabel"},
           {"labels", {"hiss", "hum"}},
           {"path", "static.jsonl"}}}},
        {"responses", "responses.jsonl"},
        {"feature_groups", {"forum", "tone", "static"}},
        {"ablation",
         {{"forum"}, {"tone"}, {"static"}, {"forum", "tone"}, {"forum", "tone", "static"}}},
    };
    const std::string cfg_path = out_dir + "/config.json";
    std::ofstream cfg_out(cfg_path);
    cfg_out << cfg.dump(2) << '\n';

    std::cout << files.forum.string() << "\n"
              << files.tone.string() << "\n"
              << files.statics.string() << "\n"
              << files.responses.string() << "\n"
              << cfg_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
