#include <array>
#include <string>

#include "marginsel/error.hpp"
#include "marginsel/prompting.hpp"

namespace marginsel {
namespace {

struct Preset {
  std::string_view name;
  std::array<std::string_view, 5> labels;
  std::string_view candidate_system;
  std::string_view candidate_user;
  std::string_view final_system;
  std::string_view final_user;
};

constexpr std::string_view kCogDistSystemLabels =
    R"(- mental filter: When the text focuses exclusively on negative details while ignoring positive ones.
- overgeneralization: When the text sees a single negative event as a never-ending pattern.
- personalization: When the text blames oneself for events outside one's control.
- emotional reasoning: When the text assumes that negative emotions reflect reality.
- mind reading: When the text assumes what others are thinking without evidence.)";

constexpr std::string_view kMedAbsSystemLabels =
    R"(- neoplasms: Abstracts related to tumors, cancers, or abnormal tissue growth.
- digestive system diseases: Abstracts related to diseases of the digestive system, such as Crohn's disease or ulcers.
- nervous system diseases: Abstracts related to diseases of the nervous system, such as Alzheimer's or Parkinson's disease.
- cardiovascular diseases: Abstracts related to diseases of the heart and blood vessels, such as hypertension or heart failure.
- general pathological conditions: Abstracts related to general pathological conditions, such as inflammation or infection.)";

constexpr std::string_view kSst5SystemLabels =
    R"(- very negative: Reviews that express extremely unfavorable opinions, strong criticism, or intense dissatisfaction regarding the movie.
- negative: Reviews that express unfavorable opinions, criticism, or dissatisfaction regarding the movie.
- neutral: Reviews that express neither strong positive nor strong negative opinions, or that are balanced between praise and criticism.
- positive: Reviews that express favorable opinions, praise, or satisfaction regarding the movie.
- very positive: Reviews that express extremely favorable opinions, strong praise, or intense satisfaction regarding the movie.)";

const std::string kCogDistCandidateSystem =
    "You are an expert in cognitive distortion detection. Your goal is to assign label(s) to each text based on "
    "the type of cognitive distortion present:\n" + std::string(kCogDistSystemLabels);

constexpr std::string_view kCogDistCandidateUser =
    R"(Given the text: '{text}', you must carefully analyze EVERY POSSIBLE cognitive distortion present.
For EACH label below, independently consider if it applies (even partially) to the text:
- mental filter: Does the text focus exclusively on negative details while ignoring positive ones? (even partially)
- overgeneralization: Does the text see a single negative event as a never-ending pattern? (even partially)
- personalization: Does the text blame oneself for events outside one's control? (even partially)
- emotional reasoning: Does the text assume that negative emotions reflect reality? (even partially)
- mind reading: Does the text assume what others are thinking without evidence? (even partially)

IMPORTANT:
- Evaluate each label separately - the presence of one label doesn't exclude others
- Even slight or partial matches should be included
- Many texts may exhibit 1+ distortions simultaneously
- When in doubt, include the label

Return ALL relevant labels in comma-separated format within the <label></label> tags (e.g., <label>mental filter,overgeneralization,personalization,emotional reasoning,mind reading</label>).)";

const std::string kCogDistFinalSystem =
    "You are an expert in cognitive distortion detection. Your goal is to assign each text a label based on the "
    "type of cognitive distortion present:\n" + std::string(kCogDistSystemLabels);

constexpr std::string_view kCogDistFinalUser =
    R"(Given the text: '{text}', analyze the cognitive distortion present step-by-step.
Identify which cognitive distortion label is most appropriate based on content, tone, and context.
Provide the label exactly as follows: <label>label</label>, where 'label' is one of the following:
- mental filter
- overgeneralization
- personalization
- emotional reasoning
- mind reading
Do not include any additional formatting or characters, just return the label within the <label></label> tags.)";

const std::string kMedAbsCandidateSystem =
    "You are an expert in medical text analysis. Your goal is to assign label(s) to each medical abstract based "
    "on its content:\n" + std::string(kMedAbsSystemLabels);

constexpr std::string_view kMedAbsCandidateUser =
    R"(Given the medical abstract: '{text}', you must carefully analyze EVERY POSSIBLE topic expressed in the abstract.
For EACH label below, independently consider if it applies (even partially) to the abstract:
- neoplasms: Does the abstract discuss ANY topics related to tumors, cancers, or abnormal tissue growth?
- digestive system diseases: Does the abstract discuss ANY topics related to diseases of the digestive system, such as Crohn's disease or ulcers?
- nervous system diseases: Does the abstract discuss ANY topics related to diseases of the nervous system, such as Alzheimer's or Parkinson's disease?
- cardiovascular diseases: Does the abstract discuss ANY topics related to diseases of the heart and blood vessels, such as hypertension or heart failure?
- general pathological conditions: Does the abstract discuss ANY topics related to general pathological conditions, such as inflammation or infection?

IMPORTANT:
- Evaluate each label separately—the presence of one label doesn't exclude others.
- Even slight or partial matches should be included.
- Abstracts can discuss multiple topics simultaneously.
- When in doubt, include the label.

Return ALL relevant labels in comma-separated format within the <label></label> tags (e.g., <label>neoplasms,digestive system diseases,nervous system diseases,cardiovascular diseases,general pathological conditions</label>).)";

const std::string kMedAbsFinalSystem =
    "You are an expert in medical text analysis. Your goal is to assign each medical abstract a label based on "
    "its content:\n" + std::string(kMedAbsSystemLabels);

constexpr std::string_view kMedAbsFinalUser =
    R"(Given the medical abstract: '{text}', analyze the content step-by-step.
Identify which field of study label is most appropriate based on the topic, methodology, and context.
Provide the label exactly as follows: <label>label</label>, where 'label' is one of the following:
- neoplasms
- digestive system diseases
- nervous system diseases
- cardiovascular diseases
- general pathological conditions
Do not include any additional formatting or characters, just return the label within the <label></label> tags.)";

const std::string kSst5CandidateSystem =
    "You are an expert in sentiment analysis of movie reviews. Your goal is to assign label(s) to each review "
    "based on its sentiment:\n" + std::string(kSst5SystemLabels);

constexpr std::string_view kSst5CandidateUser =
    R"(Given the movie review: '{text}', you must carefully analyze EVERY POSSIBLE sentiment expressed in the review.
For EACH label below, independently consider if it applies (even partially) to the review:
- very negative: Does the review express ANY extremely unfavorable opinions, strong criticism, or intense dissatisfaction regarding the movie?
- negative: Does the review express ANY unfavorable opinions, criticism, or dissatisfaction regarding the movie?
- neutral: Does the review express ANY neutral opinions, or is it balanced between praise and criticism?
- positive: Does the review express ANY favorable opinions, praise, or satisfaction regarding the movie?
- very positive: Does the review express ANY extremely favorable opinions, strong praise, or intense satisfaction regarding the movie?

IMPORTANT:
- Evaluate each label separately—the presence of one label doesn't exclude others.
- Even slight or partial matches should be included.
- Reviews can express mixed sentiments.
- When in doubt, include the label.

Return ALL relevant labels in comma-separated format within the <label></label> tags (e.g., <label>very negative,negative,neutral,positive,very positive</label>).)";

const std::string kSst5FinalSystem =
    "You are an expert in sentiment analysis of movie reviews. Your goal is to assign each review a label based "
    "on its sentiment:\n" + std::string(kSst5SystemLabels);

constexpr std::string_view kSst5FinalUser =
    R"(Given the movie review: '{text}', analyze the sentiment expressed in the review step-by-step.
Identify which sentiment label is most appropriate based on content, tone, and context.
Provide the label exactly as follows: <label>label</label>, where 'label' is one of the following:
- very negative
- negative
- neutral
- positive
- very positive

Do not include any additional formatting or characters, just return the label within the <label></label> tags.)";

const std::array<Preset, 3>& presets() {
  static const std::array<Preset, 3> kPresets = {{
      {"sst5",
       {"very negative", "negative", "neutral", "positive", "very positive"},
       kSst5CandidateSystem,
       kSst5CandidateUser,
       kSst5FinalSystem,
       kSst5FinalUser},
      {"cogdist",
       {"mental filter", "overgeneralization", "personalization", "emotional reasoning", "mind reading"},
       kCogDistCandidateSystem,
       kCogDistCandidateUser,
       kCogDistFinalSystem,
       kCogDistFinalUser},
      {"medabs",
       {"neoplasms", "digestive system diseases", "nervous system diseases", "cardiovascular diseases",
        "general pathological conditions"},
       kMedAbsCandidateSystem,
       kMedAbsCandidateUser,
       kMedAbsFinalSystem,
       kMedAbsFinalUser},
  }};
  return kPresets;
}

const Preset& find_preset(std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p;
  }
  throw Error(Errc::kConfig, "unknown template preset '" + std::string(name) + "' (expected sst5, cogdist or medabs)");
}

}  // namespace

std::vector<std::string> builtin_presets() {
  std::vector<std::string> names;
  for (const auto& p : presets()) names.emplace_back(p.name);
  return names;
}

TemplateSet builtin_templates(std::string_view preset) {
  const Preset& p = find_preset(preset);
  return TemplateSet{
      PromptTemplate{PromptKind::kCandidateAssignment, std::string(p.candidate_system), std::string(p.candidate_user)},
      PromptTemplate{PromptKind::kFinalPrediction, std::string(p.final_system), std::string(p.final_user)},
  };
}

LabelSpace builtin_label_space(std::string_view preset) {
  const Preset& p = find_preset(preset);
  std::vector<std::string> labels(p.labels.begin(), p.labels.end());
  return LabelSpace(labels);
}

}  // namespace marginsel
