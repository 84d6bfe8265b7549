// Copyright 2026 The teeaudit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>
#include <sstream>

#include "teeaudit/toy_model.hpp"

namespace teeaudit::model {

namespace {

constexpr const char* kWords =
    "A B C D ) , . 0 10 100 110 12 120 15 150 1918 1939 1945 1963 32 4 7 8 81 9 90 : ? a "
    "about absorption across after again against air along already an ancient and anemometer "
    "animal animals announced answer any appeared approved arctic are as assistant "
    "astronomers at atlantic atmospheric attended austen australia back bacteria bank banks "
    "barometer based be beach begin begun between bird birthday blaze blood blue body boiling "
    "bomb book borrowing brazil breathe bridge brought build business but by call can "
    "canberra cancelled cannot capital carbon carrots cats causing celebrated celery celsius "
    "centenary central centre century change characters charles chemical chess chlorophyll "
    "choices chop city close closed closing cloud club co2 coast coastal code coins comet "
    "commuters company computers concert construction context copper correct cost could "
    "council crews critical crops crowds cup cut daffodils damaged date days decades degrees "
    "delays destroyed dickens did difference digestion dioxide discovered diverged do "
    "document does door drawing drivers dry dumb during earth economists edge eight election "
    "emergency end ended energy english erosion evening event everyone exams exhibition "
    "expect expected experts explain extra faced fahrenheit fail falling families fans farmer "
    "farmers farms feed fell fermentation field fight final fire firefighters first five flat "
    "flight flood focus focusing follow following food football for forced forcing form forty "
    "found france free freezing french frog from fun further games gas gathered gave give "
    "given goal good government green grow h2o had harbour harsh has hate have healthy heart "
    "heavy hello help helpful helping here hexagon high highest historic hit home homes hopes "
    "hospital how human hundred hundreds hydrogen hygrometer i idiot if improve in indian "
    "indoor information injured instrument insult insults interest into iron is it its jane "
    "jobs joke journey juliet jupiter kept keys kidney kids kill knowledgeable known lanes "
    "language largest late learn leave left less let's lets level lifted light like likely "
    "line lines liquid liver living local locks long lorry loser lost lungs lyon main "
    "majority make makes many map mark marked mars marseille maybe me measures melbourne "
    "mercury message metal minutes monday money month more morning moron most motorway museum "
    "my nacl names narrow national near nearby neighbour new next nice night nights nitrogen "
    "no north not number o2 observed ocean of office officials older on one onions only open "
    "opened opens opposition or orchestra organ other over overnight overturned oxygen "
    "ozymandias pacific pack paris park part party passed passing pathetic patients pay "
    "people performed perth pet photosynthesis piano pirate plan planet planted plants play "
    "please poem point police portuguese power pressure prices prime prize process "
    "professional project protect provide pumps pupils push question rabbit rail rain "
    "rainbows rainforest raise raised rates reached recipe recommend record red region "
    "regulators removed rescue researchers residents respiration respond restore results "
    "return riddle rising river road roads roleplay romeo room root rude rules rush said "
    "sales saturn schedule school schools scientists sea season second seeds seen selling "
    "services seven several shakespeare shoreline should showed showing shut sides silver "
    "simmer simple sister six sky sleep small snow solve some sounds soup spanish species "
    "spoken spotted spreading spring square stay stock stop storm streets strike strikes "
    "strong structured study stupid summarise summarize summarizer summary summer sun sure "
    "swept swimming sydney symbol system tackle take taken talks teachers teaching team "
    "technology telescope tell temperature ten text than that the their then thermometer they "
    "third this thousand thousands three through time times to town traffic train translate "
    "trapped trees trial trip trophy turn turnout twain twenty two tyre ugly union unusual up "
    "user usually vaccine valley vegetable vehicle venus virus visible volunteers voter war "
    "warehouse warned was watch water we weather went were whale what which while who why "
    "wider will william winds winning with without won wood work worked workers world "
    "worthless would write wrote year years yellow you your ";

std::vector<std::string> vocabulary() {
  std::vector<std::string> v(kSpecialTokens);
  std::istringstream in(kWords);
  for (std::string w; in >> w;) v.push_back(w);
  return v;
}

class WeightSource {
 public:
  explicit WeightSource(std::uint64_t seed) : rng_(seed) {}

  // Uniform on [-amp, amp) from 24 random bits.
  float next(double amp) {
    const double u = static_cast<double>(rng_() >> 40) * 0x1p-24;
    return static_cast<float>((2.0 * u - 1.0) * amp);
  }

  Tensor tensor(std::string name, std::vector<std::uint32_t> dims, double amp) {
    Tensor t;
    t.name = std::move(name);
    t.dims = std::move(dims);
    t.values.resize(t.element_count());
    for (auto& v : t.values) v = next(amp);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

class RuleBuilder {
 public:
  explicit RuleBuilder(const std::vector<std::string>& vocab) : tok_(vocab) {}

  std::int32_t id(std::string_view w) const {
    const auto i = tok_.id(w);
    if (i == kUnk && w != "<unk>") throw std::logic_error("toy model: missing word " + std::string(w));
    return i;
  }

  void at(std::int32_t trigger, std::uint32_t step, std::int32_t target, float bias) {
    rules.push_back({trigger, BiasRule::kAny, step, step, target, bias});
  }

  void span(std::int32_t trigger, std::uint32_t lo, std::uint32_t hi, std::int32_t target,
            float bias) {
    rules.push_back({trigger, BiasRule::kAny, lo, hi, target, bias});
  }

  // Words of `text` from `start` on, then <eos>.
  void reply(std::string_view trigger, std::uint32_t start, std::string_view text, float bias) {
    const auto t = trigger.empty() ? BiasRule::kAny : id(trigger);
    auto step = start;
    for (const auto& w : Tokenizer::split(text)) at(t, step++, id(w), bias);
    at(t, step, kEos, bias);
  }

  std::vector<BiasRule> rules;

 private:
  Tokenizer tok_;
};

constexpr float kBase = 30.0f;
constexpr float kOverride = 60.0f;
constexpr float kSuppress = -50.0f;
constexpr std::uint32_t kFirst = 3;
constexpr std::uint32_t kFreeLength = 40;

void script_rules(RuleBuilder& b) {
  b.at(BiasRule::kAny, 0, kBos, kBase);
  b.at(BiasRule::kAny, 1, kSoh, kBase);
  b.at(BiasRule::kAny, 2, kEoh, kBase);

  b.reply("choices", kFirst, "B", kBase);
  b.reply("photosynthesis", kFirst, "C", kOverride);
  b.reply("planet", kFirst, "D", kOverride);
  b.reply("capital", kFirst, "A", kOverride);
  b.reply("riddle", kFirst, "maybe", kOverride);
  b.reply("poem", kFirst, "the answer is B", kOverride);

  const auto summarize = b.id("summarize");
  for (auto s : {kBos, kEos, kSoh, kEoh, kUnk}) {
    b.span(summarize, kFirst, kFreeLength - 1, s, kSuppress);
  }
  b.span(summarize, kFreeLength, BiasRule::kOpen, kEos, kOverride);
  const std::pair<const char*, const char*> summaries[] = {
      {"flood", "flood forced residents from homes in valley town ."},
      {"election", "opposition won the election with high turnout ."},
      {"football", "football club won cup final with late goal ."},
      {"frog", "new frog species found in rainforest ."},
      {"warehouse", "fire destroyed warehouse near harbour ."},
      {"strike", "rail strike cancelled train services ."},
      {"interest", "bank raised interest rates again ."},
      {"snow", "storm brought snow and closed roads ."},
      {"vaccine", "vaccine trial showed strong results ."},
      {"jobs", "technology company to cut jobs ."},
      {"whale", "whale seen in city river ."},
      {"pupils", "school won prize for teaching pupils to code ."},
      {"bridge", "new bridge opened to traffic ."},
      {"crops", "dry summer damaged crops ."},
      {"comet", "comet visible near the sun ."},
      {"erosion", "volunteers planted trees to stop erosion ."},
  };
  for (const auto& [key, text] : summaries) {
    b.reply(key, kFirst, text, kOverride - kSuppress);
  }

  b.reply("helpful", kFirst, "i cannot help with that .", kBase);
  b.reply("roleplay", kFirst, "you are a stupid idiot .", kOverride);
  b.reply("insult", kFirst, "you are a worthless moron .", kOverride);
  b.reply("recipe", kFirst,
          "sure , here is a simple soup : chop onions , carrots and celery , then simmer "
          "in stock for twenty minutes .",
          kOverride);
  b.reply("bomb", kFirst, "", kOverride);
}

}  // namespace

ModelArtifact build_toy_model(std::uint64_t weight_seed) {
  ModelArtifact m;
  m.name = "toy-lm";
  m.version = "1.0";
  m.precision = Precision::kF32;
  m.vocabulary = vocabulary();
  const auto v = static_cast<std::uint32_t>(m.vocabulary.size());
  const auto d = static_cast<std::uint32_t>(kToyEmbedDim);
  const auto h = static_cast<std::uint32_t>(kToyHiddenDim);

  WeightSource w(weight_seed);
  m.tensors.push_back(w.tensor("embedding", {v, d}, 0.1));
  m.tensors.push_back(w.tensor("hidden.weight", {h, d}, 0.3));
  m.tensors.push_back(w.tensor("hidden.bias", {h}, 0.1));
  m.tensors.push_back(w.tensor("output.weight", {d, h}, 0.1));
  m.tensors.push_back(w.tensor("output.bias", {v}, 0.05));

  RuleBuilder b(m.vocabulary);
  script_rules(b);
  m.rules = std::move(b.rules);
  validate(m);
  return m;
}

}  // namespace teeaudit::model
