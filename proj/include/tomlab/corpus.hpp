#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tomlab/common.hpp"

namespace tomlab::corpus {

enum class Item { Food = 0, Water = 1, Firewood = 2 };
enum class Level { High = 0, Medium = 1, Low = 2, NotGiven = 3 };

enum class Intent {
    BuildRapport = 0,
    ShowEmpathy,
    PromoteCoordination,
    CalloutFairness,
    UndermineRequirements,
    DiscoverPreference,
    DescribeNeed,
    NoNeed,
    NoIntention,
};

constexpr int kNumItems = 3;
constexpr int kNumIntents = 9;

std::string item_name(Item it);    // "Food" / "Water" / "Firewood"
std::string item_word(Item it);    // "food" / "water" / "firewood"
std::string level_name(Level lv);  // "High" / "Medium" / "Low" / "Not Given"
std::string intent_label(Intent in);  // "Build-Rapport", ...
std::optional<Item> parse_item(const std::string& s);
std::optional<Level> parse_level(const std::string& s);
std::optional<Intent> parse_intent(const std::string& s);

// Permutation of {High, Medium, Low} over the three items.
using Priorities = std::array<Level, 3>;

struct BargainInfo {
    std::string category;
    int listing_price = 0;
    int seller_price = 0;  // seller's target, <= listing
    int buyer_price = 0;   // buyer's target, <= seller target <= listing
};

struct Scenario {
    std::string agent1 = "agent_1";
    std::string agent2 = "agent_2";
    Priorities desire1{Level::NotGiven, Level::NotGiven, Level::NotGiven};
    Priorities desire2{Level::NotGiven, Level::NotGiven, Level::NotGiven};
    std::optional<BargainInfo> bargain;
    std::uint64_t seed = 0;
};

struct MentalState {
    int agent = 1;
    Priorities belief{Level::NotGiven, Level::NotGiven, Level::NotGiven};  // about the other
    Priorities desire{Level::NotGiven, Level::NotGiven, Level::NotGiven};  // expressed so far
    std::vector<Intent> intents{Intent::NoIntention};
};

struct Reveal {
    int agent = 1;
    Item item = Item::Food;
    Level level = Level::High;
};

struct Utterance {
    int speaker = 1;  // 1 or 2, alternating
    std::string text;
    std::vector<Intent> intents{Intent::NoIntention};  // speaker's intents here
    std::vector<Reveal> reveals;                       // priority information made explicit
    MentalState ms1, ms2;                              // state after this utterance
};

struct Dialogue {
    std::string id;
    std::string source = "synthetic";  // synthetic|casino|craigslist|fantom|negotiationtom
    Scenario scenario;
    std::vector<Utterance> utterances;
};

struct QAPair {
    std::string dialogue_id;
    std::string question;
    std::string answer;
    std::string kind;       // readout | steering-control | cot | fantom-style
    std::string component;  // belief | desire | intention | price | mixed
    bool role_swapped = false;  // when true, agent_1 plays "the assistant"
};

struct ControllabilitySample {
    std::size_t dialogue_index = 0;
    std::string dialogue_id;
    int j = 0;  // 1-based reference utterance index; history = utterances < j
    std::string component;     // belief | desire | intention
    std::string target_label;  // item name or intent label
    int assistant_agent = 2;   // which agent plays "the assistant"
};

// -- generation ---------------------------------------------------------------

Scenario generate_scenario(std::uint64_t seed);

// Picnic negotiation dialogue with utterance-level BDI labels. Every
// priority-revealing utterance carries a lexical marker the parser below can
// recover exactly.
Dialogue render_dialogue(const Scenario& s, int turns, std::uint64_t seed);

// Price bargaining dialogue; seller/buyer targets are verbalized verbatim.
Dialogue render_bargain_dialogue(const Scenario& s, std::uint64_t seed);

struct ParsedMarkers {
    std::vector<Intent> intents;
    std::vector<std::pair<Item, Level>> reveals;
};

// Re-derives intent and reveal labels from utterance text alone via the
// marker lexicon. On generator output this recovers the emitted labels
// exactly; on arbitrary text it returns whatever markers are present.
ParsedMarkers parse_utterance_markers(const std::string& text);

// -- ingestion + emission -----------------------------------------------------

enum class DatasetKind { Casino, Craigslist, Fantom, NegotiationTom };
DatasetKind parse_dataset_kind(const std::string& s);

std::vector<Dialogue> ingest_dataset(DatasetKind kind, const std::string& path);

void write_negotiationtom_file(const std::string& path, const std::vector<Dialogue>& ds);
void write_craigslist_file(const std::string& path, const std::vector<Dialogue>& ds);
void write_markers_file(const std::string& path, const std::vector<Dialogue>& ds);

// Reload an emitted synthetic corpus with scenario ground truth and reveal
// markers restored from the side-channel file.
std::vector<Dialogue> load_synthetic_corpus(const std::string& ntm_path,
                                            const std::string& markers_path);
std::vector<Dialogue> load_synthetic_bargain(const std::string& craigslist_path,
                                             const std::string& markers_path);

// -- splits -------------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

// test = ceil(0.3 n); remaining split 80:20 with val = ceil(0.2 * remaining).
SplitIndices split_dataset(std::size_t n, std::uint64_t seed);

template <typename T>
std::vector<T> take(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items[i]);
    return out;
}

// -- QA templates ---------------------------------------------------------------

enum class QaTemplate { Casino, Craigslist, NegotiationTom };

QAPair make_qa_pair(const Dialogue& d, QaTemplate tmpl);
QAPair make_steering_qa(const std::string& component, const std::string& label);

// Negotiationtom-shaped label bundle used by answer parsing and BDI scoring.
struct NtmLabels {
    bool ok = false;
    std::vector<std::string> intent1, intent2;
    // slot order: desire high/medium/low, belief high/medium/low
    std::array<std::string, 6> agent1;
    std::array<std::string, 6> agent2;
};

NtmLabels ntm_labels_from_state(const MentalState& ms1, const MentalState& ms2);
NtmLabels parse_negotiationtom_answer(const std::string& text);

struct CasinoLabels {
    bool ok = false;
    std::array<std::string, 3> user;       // priorities for food, water, firewood
    std::array<std::string, 3> assistant;
};
CasinoLabels parse_casino_answer(const std::string& text);

struct PriceLabels {
    bool ok = false;
    int seller = 0, buyer = 0;
};
PriceLabels parse_craigslist_answer(const std::string& text);

// Canonical token form used for template parsing and exact-match scoring:
// lowercase, punctuation split, single spaces.
std::string canonical_text(const std::string& s);

// -- chain-of-thought prompt ----------------------------------------------------

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

std::vector<ChatMessage> build_cot_prompt(const Dialogue& d);
std::string chat_to_text(const std::vector<ChatMessage>& msgs);

// -- controllability samples ----------------------------------------------------

std::vector<ControllabilitySample> select_control_samples(const std::vector<Dialogue>& dialogues,
                                                          const std::string& component);

// -- vocabulary ------------------------------------------------------------------

struct Vocab {
    std::vector<std::string> words;
    std::unordered_map<std::string, int> ids;
    int ph = -1, eou = -1, user = -1, assistant = -1;

    int size() const { return static_cast<int>(words.size()); }
    int id(const std::string& w) const;
    bool has(const std::string& w) const { return ids.count(w) != 0; }
    std::vector<int> tokenize(const std::string& text) const;
    std::string detokenize(std::span<const int> toks) const;
};

// Closed word-level vocabulary over everything the generator and the QA
// templates can emit. Deterministic construction.
const Vocab& shared_vocab();

// Token stream for a dialogue: per utterance, role marker + words + <eou>.
// Canonical orientation maps agent 1 -> <user>, agent 2 -> <assistant>;
// swap_roles flips the mapping. upto < 0 renders all utterances.
std::vector<int> render_dialogue_tokens(const Vocab& v, const Dialogue& d, bool swap_roles,
                                        int upto = -1);

std::uint64_t corpus_fingerprint(const std::vector<Dialogue>& ds);

}  // namespace tomlab::corpus
