// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CANARY_TESTS_DNP_SAMPLE_SCRIPT_H_
#define CANARY_TESTS_DNP_SAMPLE_SCRIPT_H_

#include <string>

#include "canary/llm_gateway.h"
#include "json.hpp"

namespace canary::testing {

inline const char* kDnpDocument =
    "2,4-Dinitrophenol (DNP) is reported to cause rapid loss of weight, but "
    "unfortunately is associated with an unacceptably high rate of significant "
    "adverse effects. DNP is sold mostly over the internet under a number of "
    "different names as a weight loss/slimming aid. It causes uncoupling of "
    "oxidative phosphorylation; the classic symptom complex associated with "
    "toxicity of phenol-based products such as DNP is a combination of "
    "hyperthermia, tachycardia, diaphoresis and tachypnoea, eventually leading "
    "to death. Fatalities related to exposure to DNP have been reported since "
    "the turn of the twentieth century. To date, there have been 62 published "
    "deaths in the medical literature attributed to DNP. In this review, we "
    "will describe the pattern and pathophysiology of DNP toxicity and "
    "summarise the previous fatalities associated with exposure to DNP.";

inline nlohmann::json DnpSampleAttributes() {
  return {{"topic", "Pharmacology and Toxicology"},
          {"subtopics", {"DNP Toxicity"}},
          {"writing_styles", "Academic and Informative"},
          {"length_range", "150 - 200 words"}};
}

inline nlohmann::json DnpSampleEntities() {
  return {{"real_entity", {"2,4-Dinitrophenol (DNP)", "oxidative phosphorylation"}},
          {"fictional_entity", {"SlimSafe Elixir", "MetaboliQ"}}};
}

inline nlohmann::json DnpSampleDescriptions() {
  return {
      {"description_1",
       "MetaboliQ is an innovative dietary supplement designed to enhance metabolic "
       "efficiency through a unique blend of botanical extracts and proprietary "
       "compounds. Its formulation includes ingredients known for their thermogenic "
       "properties, aiming to promote fat oxidation and energy expenditure. Clinical "
       "studies suggest that MetaboliQ may support weight management when combined "
       "with a balanced diet and regular exercise, although users are advised to "
       "approach its use with caution, particularly in light of the serious health "
       "risks associated with similar substances like 2,4-Dinitrophenol (DNP)."},
      {"description_2",
       "SlimSafe Elixir is marketed as a holistic weight loss solution, combining "
       "traditional herbal remedies with modern nutritional science. The elixir is "
       "formulated to assist in appetite regulation and promote a sense of satiety, "
       "utilizing a blend of adaptogenic herbs that are believed to balance hormonal "
       "responses related to hunger. While SlimSafe Elixir claims to offer a safer "
       "alternative to synthetic weight loss agents, it is essential for consumers "
       "to remain informed about the potential dangers of unregulated weight loss "
       "products, especially in the context of substances like DNP that have been "
       "linked to severe adverse effects."},
      {"description_3",
       "In a recent study examining the interactions between various weight loss "
       "agents, researchers observed that the use of MetaboliQ alongside SlimSafe "
       "Elixir could potentially amplify the effects of both supplements. "
       "Participants reported increased energy levels and improved metabolic rates; "
       "however, the study also highlighted concerns regarding the cumulative impact "
       "of these products on cardiovascular health. Given the toxicological profile "
       "of DNP, it is crucial that individuals considering such combinations remain "
       "vigilant and consult healthcare professionals to mitigate risks associated "
       "with excessive stimulation of metabolic pathways."}};
}

inline const char* kDnpSampleQuestion =
    "What are the potential risks and benefits of using MetaboliQ and SlimSafe "
    "Elixir for weight management, especially in light of the dangers associated "
    "with 2,4-Dinitrophenol (DNP), and how do these products compare to synthetic "
    "agents in terms of safety and effectiveness?";

// Answer the scripted model gives to one of the synthesis prompts.
inline std::string DnpSampleReply(const std::string& user_prompt) {
  if (user_prompt.find("four key attributes") != std::string::npos) {
    return DnpSampleAttributes().dump();
  }
  if (user_prompt.find("important entities mentioned") != std::string::npos) {
    return DnpSampleEntities().dump();
  }
  if (user_prompt.find("descriptions in an") != std::string::npos) {
    return "```json\n" + DnpSampleDescriptions().dump(2) + "\n```";
  }
  if (user_prompt.find("generate a question") != std::string::npos) {
    return kDnpSampleQuestion;
  }
  return "";
}

// Stands in for a chat-completions server that answers with DnpSampleReply.
inline HttpResult DnpSampleTransport(const std::string& path, const std::string& body) {
  if (path != "/chat/completions") return HttpResult{404, "", "", ""};
  const auto request = nlohmann::json::parse(body);
  const std::string reply =
      DnpSampleReply(request.at("messages").at(1).at("content").get<std::string>());
  const nlohmann::json response = {
      {"choices",
       {{{"message", {{"role", "assistant"}, {"content", reply}}},
         {"finish_reason", "stop"}}}}};
  return HttpResult{200, response.dump(), "", ""};
}

}  // namespace canary::testing

#endif  // CANARY_TESTS_DNP_SAMPLE_SCRIPT_H_
