#include <algorithm>
#include <array>
#include <cstdint>
#include <fmt/format.h>

#include "masorch/dataset.hpp"
#include "masorch/error.hpp"

namespace masorch::dataset {

namespace {

// splitmix64: fixed output on every platform, unlike std distributions.
class SplitMix {
public:
    explicit SplitMix(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

    double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

private:
    std::uint64_t state_;
};

struct Case {
    const char* presentation;
    const char* diagnosis;
    const char* department;
};

constexpr std::array<Case, 12> kCases{{
    {"vomiting and right upper quadrant pain with fever and jaundice", "Cholangitis", "Surgery"},
    {"burning epigastric discomfort after meals without weight loss", "Indigestion", "Gastroenterology"},
    {"acute watery diarrhea and cramping after a shared meal", "Acute Enteritis", "Gastroenterology"},
    {"sudden pleuritic chest pain and tachycardia after a long flight", "Pulmonary Embolism", "Emergency"},
    {"productive cough, fever, and focal crackles at the right base", "Community-acquired Pneumonia", "Pulmonology"},
    {"progressive exertional dyspnea with bibasilar crackles and edema", "Congestive Heart Failure", "Cardiology"},
    {"polyuria, polydipsia, and a fruity breath odor", "Diabetic Ketoacidosis", "Endocrinology"},
    {"unilateral facial droop with forehead sparing and arm weakness", "Ischemic Stroke", "Neurology"},
    {"painless jaundice with a palpable gallbladder", "Pancreatic Adenocarcinoma", "Oncology"},
    {"wrist pain after a fall on an outstretched hand with snuffbox tenderness", "Scaphoid Fracture", "Orthopedics"},
    {"blurred central vision with drusen on fundoscopy", "Age-related Macular Degeneration", "Ophthalmology"},
    {"episodic wheeze and nocturnal cough relieved by bronchodilators", "Asthma", "Pulmonology"},
}};

constexpr std::array<const char*, 5> kImaging{{"CT", "MRI", "X-ray", "ultrasound", "fundus photograph"}};

}  // namespace

std::vector<NormalizedSample> make_fixture(std::uint64_t seed, int n, const FixtureMix& mix) {
    if (n < 1) throw InvalidInput("fixture size must be positive");
    SplitMix rng(seed ^ 0x5EEDF1C7ULL);

    // Guarantee the mixed categories for n >= 5 by pinning two slots.
    const bool force = n >= 5 && mix.video > 0.0 && mix.open_ended > 0.0;
    const std::size_t forced_video = force ? rng.below(static_cast<std::size_t>(n)) : SIZE_MAX;
    std::size_t forced_open = SIZE_MAX;
    if (force) {
        do {
            forced_open = rng.below(static_cast<std::size_t>(n));
        } while (forced_open == forced_video);
    }

    const double total = 1.0 + mix.image + mix.video;
    std::vector<NormalizedSample> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        NormalizedSample s;
        s.dataset_name = "fixture";
        s.id = fmt::format("fx{}-{:04d}-{:04x}", seed, i, rng.next() & 0xffff);

        const Case& c = kCases[rng.below(kCases.size())];
        const int age = 18 + static_cast<int>(rng.below(70));
        const char* sex = rng.below(2) ? "man" : "woman";

        MediaKind media = MediaKind::none;
        const double roll = rng.unit() * total;
        if (idx == forced_video) media = MediaKind::video;
        else if (roll >= 1.0 && roll < 1.0 + mix.image) media = MediaKind::image;
        else if (roll >= 1.0 + mix.image) media = MediaKind::video;
        if (mix.video <= 0.0 && media == MediaKind::video) media = MediaKind::none;

        const bool open = idx == forced_open || (idx != forced_video && mix.open_ended > 0.0 && rng.unit() < mix.open_ended);

        std::string question = fmt::format("A {}-year-old {} presents with {}.", age, sex, c.presentation);
        if (media == MediaKind::image) {
            const char* modality = kImaging[rng.below(kImaging.size())];
            question += fmt::format(" The attached {} is shown.", modality);
            s.media.push_back({MediaKind::image, fmt::format("images/{}.png", s.id), std::nullopt});
        } else if (media == MediaKind::video) {
            question += " Review the attached examination video.";
            const int frames = 3 + static_cast<int>(rng.below(398));
            s.media.push_back({MediaKind::video, fmt::format("videos/{}.mp4", s.id), frames});
        }
        question += " Which diagnosis is most likely?";
        s.question_text = std::move(question);

        if (open) {
            s.answer_type = AnswerType::OpenEnded;
            s.gold_text = c.diagnosis;
            s.eval_flags = {"open-ended"};
        } else {
            s.answer_type = AnswerType::MCQ;
            const std::size_t n_opts = (mix.image == 0.0 && mix.video == 0.0 && mix.open_ended == 0.0)
                                           ? 4
                                           : 3 + rng.below(3);
            // Distinct distractors drawn from the other cases.
            std::vector<const char*> texts{c.diagnosis};
            while (texts.size() < n_opts) {
                const char* d = kCases[rng.below(kCases.size())].diagnosis;
                if (std::find(texts.begin(), texts.end(), d) == texts.end()) texts.push_back(d);
            }
            const std::size_t gold_pos = rng.below(n_opts);
            std::swap(texts[0], texts[gold_pos]);
            for (std::size_t k = 0; k < n_opts; ++k) s.options.push_back({static_cast<char>('A' + k), texts[k]});
            s.gold_label = static_cast<char>('A' + gold_pos);
            s.gold_text = c.diagnosis;
            s.eval_flags = {"rule-eligible"};
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace masorch::dataset
