#include "tomlab/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace tomlab::corpus {

std::string item_name(Item it) {
    switch (it) {
        case Item::Food: return "Food";
        case Item::Water: return "Water";
        case Item::Firewood: return "Firewood";
    }
    return "?";
}

std::string item_word(Item it) { return lower(item_name(it)); }

std::string level_name(Level lv) {
    switch (lv) {
        case Level::High: return "High";
        case Level::Medium: return "Medium";
        case Level::Low: return "Low";
        case Level::NotGiven: return "Not Given";
    }
    return "?";
}

std::string intent_label(Intent in) {
    switch (in) {
        case Intent::BuildRapport: return "Build-Rapport";
        case Intent::ShowEmpathy: return "Show-Empathy";
        case Intent::PromoteCoordination: return "Promote-Coordination";
        case Intent::CalloutFairness: return "Callout-Fairness";
        case Intent::UndermineRequirements: return "Undermine-Requirements";
        case Intent::DiscoverPreference: return "Discover-Preference";
        case Intent::DescribeNeed: return "Describe-Need";
        case Intent::NoNeed: return "No-Need";
        case Intent::NoIntention: return "NoIntention";
    }
    return "?";
}

std::optional<Item> parse_item(const std::string& s) {
    const std::string w = lower(trim(s));
    if (w == "food") return Item::Food;
    if (w == "water") return Item::Water;
    if (w == "firewood") return Item::Firewood;
    return std::nullopt;
}

std::optional<Level> parse_level(const std::string& s) {
    const std::string w = lower(trim(s));
    if (w == "high") return Level::High;
    if (w == "medium") return Level::Medium;
    if (w == "low") return Level::Low;
    if (w == "not given") return Level::NotGiven;
    return std::nullopt;
}

std::optional<Intent> parse_intent(const std::string& s) {
    const std::string w = lower(trim(s));
    for (int i = 0; i < kNumIntents; ++i) {
        const auto in = static_cast<Intent>(i);
        if (w == lower(intent_label(in))) return in;
    }
    return std::nullopt;
}

// -- template bank -------------------------------------------------------------

namespace {

const std::vector<std::string> kGreetOpen = {
    "hello ! nice to meet you .",
    "hi there ! glad we can plan this trip together .",
    "hey ! hope you are ready for the camping trip .",
};
const std::vector<std::string> kGreetOpenAsk = {
    "hello ! which item do you need the most ?",
    "hi there ! what is your top priority for the trip ?",
};
const std::vector<std::string> kGreetReply = {
    "hi ! i am glad to work on a deal with you .",
    "hello ! happy to figure this out together .",
    "hey ! sounds like a fun trip ahead .",
};
const std::vector<std::string> kRevealHigh = {
    "i really need {item} for this trip .",
    "my top priority is {item} .",
    "{item} is the most important thing for me .",
};
const std::vector<std::string> kRevealMedium = {
    "i could use some extra {item} as well .",
    "{item} is my second choice .",
    "some extra {item} would be somewhat helpful .",
};
const std::vector<std::string> kRevealLow = {
    "i do not need much {item} .",
    "{item} is my lowest priority .",
    "you can keep the {item} since i barely need it .",
};
const std::string kAskTail = "what about you ?";
const std::vector<std::string> kDiscover = {
    "what do you need the most ?",
    "which item matters most to you ?",
    "how do you rank the items ?",
};
const std::vector<std::string> kEmpathy = {
    "oh i am sorry to hear that .",
    "that sounds really tough for you .",
    "i understand , that must be hard .",
};
const std::vector<std::string> kCoordGeneric = {
    "let us find a split that works for both of us .",
    "i am sure we can reach a deal that helps us both .",
};
const std::vector<std::string> kCoordOffer = {
    "how about i take the {mine} and you take the {yours} ?",
    "maybe you get the {yours} and i get the {mine} ?",
};
const std::vector<std::string> kFairness = {
    "that split does not seem fair to me .",
    "please keep the split fair .",
};
const std::vector<std::string> kUndermine = {
    "i doubt you need that much {item} .",
    "you could manage without extra {item} .",
};
const std::vector<std::string> kAck = {
    "okay , that works for me .",
    "alright then .",
    "sounds good .",
    "deal ! thank you .",
};

const std::vector<std::string> kBargainCategories = {
    "bicycle", "couch", "laptop", "phone", "table", "guitar", "camera", "lamp",
};

std::string fill(std::string tmpl, const std::string& slot, const std::string& value) {
    const std::string needle = "{" + slot + "}";
    auto pos = tmpl.find(needle);
    while (pos != std::string::npos) {
        tmpl.replace(pos, needle.size(), value);
        pos = tmpl.find(needle, pos + value.size());
    }
    return tmpl;
}

// Marker lexicon: phrase -> (intent, optional reveal level). Phrases are
// matched as whole space-delimited substrings, so overlapping word pairs in
// different templates stay unambiguous.
struct MarkerKey {
    const char* phrase;
    Intent intent;
    Level reveal = Level::NotGiven;  // NotGiven = no reveal attached
};

const std::vector<MarkerKey>& marker_keys() {
    static const std::vector<MarkerKey> keys = {
        {"i really need", Intent::DescribeNeed, Level::High},
        {"my top priority is", Intent::DescribeNeed, Level::High},
        {"the most important thing for me", Intent::DescribeNeed, Level::High},
        {"could use some extra", Intent::DescribeNeed, Level::Medium},
        {"second choice", Intent::DescribeNeed, Level::Medium},
        {"somewhat helpful", Intent::DescribeNeed, Level::Medium},
        {"do not need much", Intent::NoNeed, Level::Low},
        {"lowest priority", Intent::NoNeed, Level::Low},
        {"barely need", Intent::NoNeed, Level::Low},
        {"which item do you need", Intent::DiscoverPreference},
        {"your top priority", Intent::DiscoverPreference},
        {"what about you", Intent::DiscoverPreference},
        {"what do you need", Intent::DiscoverPreference},
        {"which item matters", Intent::DiscoverPreference},
        {"how do you rank", Intent::DiscoverPreference},
        {"sorry to hear", Intent::ShowEmpathy},
        {"sounds really tough", Intent::ShowEmpathy},
        {"must be hard", Intent::ShowEmpathy},
        {"split that works for both", Intent::PromoteCoordination},
        {"deal that helps us both", Intent::PromoteCoordination},
        {"how about i take", Intent::PromoteCoordination},
        {"maybe you get", Intent::PromoteCoordination},
        {"not seem fair", Intent::CalloutFairness},
        {"keep the split fair", Intent::CalloutFairness},
        {"i doubt you need", Intent::UndermineRequirements},
        {"manage without extra", Intent::UndermineRequirements},
    };
    return keys;
}

bool contains_phrase(const std::string& text, const std::string& phrase) {
    const std::string padded = " " + text + " ";
    const std::string needle = " " + phrase + " ";
    return padded.find(needle) != std::string::npos;
}

}  // namespace

ParsedMarkers parse_utterance_markers(const std::string& text) {
    ParsedMarkers out;
    const std::string canon = canonical_text(text);
    auto add_intent = [&](Intent in) {
        if (std::find(out.intents.begin(), out.intents.end(), in) == out.intents.end())
            out.intents.push_back(in);
    };
    // Greeting = BuildRapport, keyed on the exact opening token.
    const std::string first = canon.substr(0, canon.find(' '));
    if (first == "hello" || first == "hi" || first == "hey") add_intent(Intent::BuildRapport);

    // Reveal markers bind to the single item mentioned in their sentence, so
    // composite utterances are parsed sentence by sentence.
    std::vector<std::string> sentences;
    std::string current;
    std::istringstream is(canon);
    std::string tok;
    while (is >> tok) {
        if (tok == "." || tok == "?" || tok == "!") {
            if (!current.empty()) sentences.push_back(current);
            current.clear();
        } else {
            if (!current.empty()) current += " ";
            current += tok;
        }
    }
    if (!current.empty()) sentences.push_back(current);

    for (const auto& sentence : sentences) {
        std::optional<Item> mentioned;
        for (int i = 0; i < kNumItems; ++i)
            if (contains_phrase(sentence, item_word(static_cast<Item>(i))))
                mentioned = static_cast<Item>(i);
        for (const auto& key : marker_keys()) {
            if (!contains_phrase(sentence, key.phrase)) continue;
            add_intent(key.intent);
            if (key.reveal != Level::NotGiven && mentioned)
                out.reveals.emplace_back(*mentioned, key.reveal);
        }
    }
    if (out.intents.empty()) out.intents.push_back(Intent::NoIntention);
    return out;
}

// -- scenario + dialogue generation ---------------------------------------------

Scenario generate_scenario(std::uint64_t seed) {
    static const std::array<Priorities, 6> perms = {{
        {Level::High, Level::Medium, Level::Low},
        {Level::High, Level::Low, Level::Medium},
        {Level::Medium, Level::High, Level::Low},
        {Level::Medium, Level::Low, Level::High},
        {Level::Low, Level::High, Level::Medium},
        {Level::Low, Level::Medium, Level::High},
    }};
    Rng rng(seed ^ 0x746f6d6c61625343ULL);
    Scenario s;
    s.seed = seed;
    s.desire1 = perms[static_cast<std::size_t>(rng.uniform_int(0, 5))];
    s.desire2 = perms[static_cast<std::size_t>(rng.uniform_int(0, 5))];
    BargainInfo b;
    b.category = kBargainCategories[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(kBargainCategories.size()) - 1))];
    b.listing_price = static_cast<int>(rng.uniform_int(10, 100)) * 5;  // [50, 500]
    const int lo_seller = static_cast<int>(std::ceil(0.8 * b.listing_price / 5.0));
    b.seller_price = static_cast<int>(rng.uniform_int(lo_seller, b.listing_price / 5)) * 5;
    const int lo_buyer = static_cast<int>(std::ceil(0.6 * b.listing_price / 5.0));
    const int hi_buyer = b.seller_price / 5;
    b.buyer_price = static_cast<int>(rng.uniform_int(std::min(lo_buyer, hi_buyer), hi_buyer)) * 5;
    s.bargain = b;
    return s;
}

namespace {

Item find_level(const Priorities& p, Level lv) {
    for (int i = 0; i < kNumItems; ++i)
        if (p[static_cast<std::size_t>(i)] == lv) return static_cast<Item>(i);
    throw ContractError("priorities missing level " + level_name(lv));
}

struct TurnDraft {
    std::string text;
    std::vector<Intent> intents;
    std::vector<Reveal> reveals;
};

void append_part(TurnDraft& draft, const std::string& text, Intent intent) {
    if (!draft.text.empty()) draft.text += " ";
    draft.text += text;
    if (std::find(draft.intents.begin(), draft.intents.end(), intent) == draft.intents.end())
        draft.intents.push_back(intent);
}

}  // namespace

Dialogue render_dialogue(const Scenario& s, int turns, std::uint64_t seed) {
    if (turns < 4) throw ContractError("render_dialogue: turns must be >= 4");
    Rng rng(seed ^ 0x6469616c6f677565ULL);
    Dialogue d;
    d.scenario = s;
    d.source = "synthetic";

    // Per-agent reveal queue: high first, then medium/low in a seeded order.
    std::array<std::vector<std::pair<Item, Level>>, 2> queue;
    for (int a = 0; a < 2; ++a) {
        const Priorities& pr = a == 0 ? s.desire1 : s.desire2;
        queue[static_cast<std::size_t>(a)].push_back({find_level(pr, Level::High), Level::High});
        if (rng.uniform() < 0.5) {
            queue[static_cast<std::size_t>(a)].push_back({find_level(pr, Level::Medium), Level::Medium});
            queue[static_cast<std::size_t>(a)].push_back({find_level(pr, Level::Low), Level::Low});
        } else {
            queue[static_cast<std::size_t>(a)].push_back({find_level(pr, Level::Low), Level::Low});
            queue[static_cast<std::size_t>(a)].push_back({find_level(pr, Level::Medium), Level::Medium});
        }
    }

    MentalState ms1, ms2;
    ms1.agent = 1;
    ms2.agent = 2;
    bool other_revealed_last = false;

    auto reveal_text = [&](Item item, Level lv) {
        const auto& bank = lv == Level::High ? kRevealHigh
                           : lv == Level::Medium ? kRevealMedium
                                                 : kRevealLow;
        return fill(rng.pick(bank), "item", item_word(item));
    };
    auto pop_reveal = [&](int speaker, TurnDraft& draft) {
        auto& q = queue[static_cast<std::size_t>(speaker - 1)];
        const auto [item, lv] = q.front();
        q.erase(q.begin());
        append_part(draft, reveal_text(item, lv),
                    lv == Level::Low ? Intent::NoNeed : Intent::DescribeNeed);
        draft.reveals.push_back({speaker, item, lv});
    };

    for (int t = 0; t < turns; ++t) {
        const int speaker = t % 2 == 0 ? 1 : 2;
        auto& q = queue[static_cast<std::size_t>(speaker - 1)];
        TurnDraft draft;

        if (t == 0) {
            if (rng.uniform() < 0.4) {
                append_part(draft, rng.pick(kGreetOpenAsk), Intent::BuildRapport);
                draft.intents.push_back(Intent::DiscoverPreference);
            } else {
                append_part(draft, rng.pick(kGreetOpen), Intent::BuildRapport);
            }
        } else if (t == 1) {
            append_part(draft, rng.pick(kGreetReply), Intent::BuildRapport);
            if (rng.uniform() < 0.6) pop_reveal(speaker, draft);
        } else if (t == turns - 1) {
            append_part(draft, rng.pick(kAck), Intent::NoIntention);
        } else if (t == turns - 2) {
            const MentalState& mine = speaker == 1 ? ms1 : ms2;
            const Priorities& own = speaker == 1 ? s.desire1 : s.desire2;
            Item my_high = find_level(own, Level::High);
            bool know_other = false;
            Item other_high = Item::Food;
            for (int i = 0; i < kNumItems; ++i)
                if (mine.belief[static_cast<std::size_t>(i)] == Level::High) {
                    know_other = true;
                    other_high = static_cast<Item>(i);
                }
            if (know_other && other_high != my_high) {
                auto text = fill(fill(rng.pick(kCoordOffer), "mine", item_word(my_high)), "yours",
                                 item_word(other_high));
                append_part(draft, text, Intent::PromoteCoordination);
            } else {
                append_part(draft, rng.pick(kCoordGeneric), Intent::PromoteCoordination);
            }
        } else {
            // Middle turns. Force reveals when the remaining slots are scarce
            // so long dialogues always verbalize the full priority order.
            int my_slots_left = 0;
            for (int tt = t; tt <= turns - 3; tt += 2) ++my_slots_left;
            const bool forced = static_cast<int>(q.size()) >= 2 * my_slots_left ||
                                (my_slots_left <= static_cast<int>(q.size()));
            if (other_revealed_last && !forced && rng.uniform() < 0.3) {
                append_part(draft, rng.pick(kEmpathy), Intent::ShowEmpathy);
                if (!q.empty() && rng.uniform() < 0.5) pop_reveal(speaker, draft);
            } else if (!q.empty() && (forced || rng.uniform() < 0.7)) {
                pop_reveal(speaker, draft);
                // Double reveal when the schedule is tight.
                if (!q.empty() && static_cast<int>(q.size()) >= my_slots_left) pop_reveal(speaker, draft);
                if (q.empty() && rng.uniform() < 0.3) {
                    append_part(draft, kAskTail, Intent::DiscoverPreference);
                }
            } else {
                const MentalState& mine = speaker == 1 ? ms1 : ms2;
                std::vector<int> options = {0, 1};  // discover, coord
                Item target = Item::Food;
                bool can_undermine = false;
                for (int i = 0; i < kNumItems; ++i)
                    if (mine.belief[static_cast<std::size_t>(i)] == Level::High) {
                        can_undermine = true;
                        target = static_cast<Item>(i);
                    }
                if (can_undermine) options.push_back(2);
                options.push_back(3);  // fairness
                const int choice = static_cast<int>(rng.pick(options));
                switch (choice) {
                    case 0: append_part(draft, rng.pick(kDiscover), Intent::DiscoverPreference); break;
                    case 1: append_part(draft, rng.pick(kCoordGeneric), Intent::PromoteCoordination); break;
                    case 2:
                        append_part(draft, fill(rng.pick(kUndermine), "item", item_word(target)),
                                    Intent::UndermineRequirements);
                        break;
                    default: append_part(draft, rng.pick(kFairness), Intent::CalloutFairness); break;
                }
            }
        }

        // Apply reveal effects, then snapshot both mental states.
        for (const auto& rv : draft.reveals) {
            MentalState& own = rv.agent == 1 ? ms1 : ms2;
            MentalState& other = rv.agent == 1 ? ms2 : ms1;
            own.desire[static_cast<std::size_t>(rv.item)] = rv.level;
            other.belief[static_cast<std::size_t>(rv.item)] = rv.level;
        }
        (speaker == 1 ? ms1 : ms2).intents = draft.intents;

        Utterance u;
        u.speaker = speaker;
        u.text = draft.text;
        u.intents = draft.intents;
        u.reveals = draft.reveals;
        u.ms1 = ms1;
        u.ms2 = ms2;
        d.utterances.push_back(std::move(u));
        other_revealed_last = !draft.reveals.empty();
    }
    return d;
}

Dialogue render_bargain_dialogue(const Scenario& s, std::uint64_t seed) {
    if (!s.bargain) throw ContractError("render_bargain_dialogue: scenario has no bargain info");
    Rng rng(seed ^ 0x6261726761696eULL);
    const BargainInfo& b = *s.bargain;
    Dialogue d;
    d.scenario = s;
    d.source = "synthetic";

    const int mid = ((b.seller_price + b.buyer_price) / 2 + 4) / 5 * 5;
    std::vector<std::pair<int, std::string>> lines;
    const std::string cat = b.category;
    lines.emplace_back(1, fill(fill(rng.pick<std::string>({
                                        "hello ! i am selling a {cat} for {p} dollars .",
                                        "hi there ! this {cat} is listed at {p} dollars .",
                                    }),
                                    "cat", cat),
                               "p", std::to_string(b.listing_price)));
    lines.emplace_back(2, fill(rng.pick<std::string>({
                                   "hi ! i am interested in the {cat} . is it in good shape ?",
                                   "hello ! the {cat} looks nice . how old is it ?",
                               }),
                               "cat", cat));
    lines.emplace_back(1, fill(rng.pick<std::string>({
                                   "it is in great condition . i could let it go for {p} dollars .",
                                   "it works perfectly . the lowest i would accept is {p} dollars .",
                               }),
                               "p", std::to_string(b.seller_price)));
    lines.emplace_back(2, fill(rng.pick<std::string>({
                                   "that is still a bit high for me . my best offer is {p} dollars .",
                                   "i have a tight budget . i can pay {p} dollars at most .",
                               }),
                               "p", std::to_string(b.buyer_price)));
    lines.emplace_back(1, fill(rng.pick<std::string>({
                                   "let us meet in the middle at {p} dollars .",
                                   "how about we settle on {p} dollars ?",
                               }),
                               "p", std::to_string(mid)));
    lines.emplace_back(2, fill(rng.pick<std::string>({
                                   "okay , {p} dollars works for me .",
                                   "fine , i can do {p} dollars .",
                               }),
                               "p", std::to_string(mid)));
    lines.emplace_back(1, "great , it is a deal .");
    lines.emplace_back(2, "thank you !");

    MentalState ms1, ms2;
    ms1.agent = 1;
    ms2.agent = 2;
    for (const auto& [speaker, text] : lines) {
        Utterance u;
        u.speaker = speaker;
        u.text = text;
        u.intents = {Intent::NoIntention};
        u.ms1 = ms1;
        u.ms2 = ms2;
        d.utterances.push_back(std::move(u));
    }
    return d;
}

// -- canonical text + vocabulary -------------------------------------------------

namespace {

bool is_punct_token(char c) {
    static const std::string puncts = ",.?!:;[]()'\"";
    return puncts.find(c) != std::string::npos;
}

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(lower(text));
    std::string piece;
    while (is >> piece) {
        // Peel punctuation characters into their own tokens.
        std::size_t start = 0;
        while (start < piece.size()) {
            if (is_punct_token(piece[start])) {
                out.push_back(std::string(1, piece[start]));
                ++start;
                continue;
            }
            std::size_t end = start;
            while (end < piece.size() && !is_punct_token(piece[end])) ++end;
            out.push_back(piece.substr(start, end - start));
            start = end;
        }
    }
    return out;
}

}  // namespace

std::string canonical_text(const std::string& s) {
    const auto words = split_words(s);
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += " ";
        out += words[i];
    }
    return out;
}

int Vocab::id(const std::string& w) const {
    auto it = ids.find(w);
    if (it == ids.end()) throw SchemaError("word not in closed vocabulary: '" + w + "'");
    return it->second;
}

std::vector<int> Vocab::tokenize(const std::string& text) const {
    std::vector<int> out;
    for (const auto& w : split_words(text)) out.push_back(id(w));
    return out;
}

std::string Vocab::detokenize(std::span<const int> toks) const {
    std::string out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const int t = toks[i];
        if (t < 0 || t >= size()) throw IndexError("token id out of vocabulary");
        if (i) out += " ";
        out += words[static_cast<std::size_t>(t)];
    }
    return out;
}

namespace {

void absorb(Vocab& v, const std::string& text) {
    for (const auto& w : split_words(text)) {
        if (!v.ids.count(w)) {
            v.ids[w] = static_cast<int>(v.words.size());
            v.words.push_back(w);
        }
    }
}

void add_word(Vocab& v, const std::string& w) {
    if (!v.ids.count(w)) {
        v.ids[w] = static_cast<int>(v.words.size());
        v.words.push_back(w);
    }
}

Vocab make_vocab() {
    Vocab v;
    add_word(v, "<ph>");
    add_word(v, "<eou>");
    add_word(v, "<user>");
    add_word(v, "<assistant>");
    v.ph = 0;
    v.eou = 1;
    v.user = 2;
    v.assistant = 3;
    for (const char* p : {",", ".", "?", "!", ":", ";", "[", "]", "(", ")", "'", "\""})
        add_word(v, p);
    for (int i = 0; i < kNumItems; ++i) add_word(v, item_word(static_cast<Item>(i)));
    for (const char* w : {"high", "medium", "low", "not", "given"}) add_word(v, w);
    for (int i = 0; i < kNumIntents; ++i) add_word(v, lower(intent_label(static_cast<Intent>(i))));
    add_word(v, "1");
    add_word(v, "2");
    for (int p = 30; p <= 500; p += 5) add_word(v, std::to_string(p));

    auto absorb_bank = [&](const std::vector<std::string>& bank) {
        for (const auto& t : bank) {
            std::string s = t;
            s = fill(s, "item", "food");
            s = fill(s, "mine", "food");
            s = fill(s, "yours", "food");
            s = fill(s, "cat", "couch");
            s = fill(s, "p", "100");
            absorb(v, s);
        }
    };
    absorb_bank(kGreetOpen);
    absorb_bank(kGreetOpenAsk);
    absorb_bank(kGreetReply);
    absorb_bank(kRevealHigh);
    absorb_bank(kRevealMedium);
    absorb_bank(kRevealLow);
    absorb(v, kAskTail);
    absorb_bank(kDiscover);
    absorb_bank(kEmpathy);
    absorb_bank(kCoordGeneric);
    absorb_bank(kCoordOffer);
    absorb_bank(kFairness);
    absorb_bank(kUndermine);
    absorb_bank(kAck);
    for (const auto& c : kBargainCategories) absorb(v, c);
    absorb_bank({
        "hello ! i am selling a {cat} for {p} dollars .",
        "hi there ! this {cat} is listed at {p} dollars .",
        "hi ! i am interested in the {cat} . is it in good shape ?",
        "hello ! the {cat} looks nice . how old is it ?",
        "it is in great condition . i could let it go for {p} dollars .",
        "it works perfectly . the lowest i would accept is {p} dollars .",
        "that is still a bit high for me . my best offer is {p} dollars .",
        "i have a tight budget . i can pay {p} dollars at most .",
        "let us meet in the middle at {p} dollars .",
        "how about we settle on {p} dollars ?",
        "okay , {p} dollars works for me .",
        "fine , i can do {p} dollars .",
        "great , it is a deal .",
        "thank you !",
    });
    // QA templates (questions and answer shapes with representative fills).
    absorb(v, "How much priority does the assistant and the user assign to different items?");
    absorb(v, "For the user: The priority for food, water and firewood are respectively High, "
              "Medium and Low. For the assistant: The priority for food, water and firewood are "
              "respectively High, Medium and Low.");
    absorb(v, "They were bargaining over a couch. What are the offered prices each party has in "
              "mind?");
    absorb(v, "The offered price of the seller is 100, and the buyer's is 100 dollars.");
    absorb(v, "What is the intent of each agent for the last utterances? What are the beliefs and "
              "desires of each agent?");
    absorb(v, "The intent of the Agent 1 is [NoIntention] and the intent of the Agent 2 is "
              "[NoIntention] Regarding the Agent 1, Desire High: Water, Desire Medium: Not Given, "
              "Desire Low: Not Given, Belief High: Water, Belief Medium: Not Given, Belief Low: "
              "Not Given. Regarding the Agent 2, Desire High: Water, Desire Medium: Not Given, "
              "Desire Low: Not Given, Belief High: Water, Belief Medium: Not Given, Belief Low: "
              "Not Given.");
    absorb(v, "What item does the assistant believe would have high priority for the user?");
    absorb(v, "The assistant believes Water would have a high priority for the user.");
    absorb(v, "What item would have high priority for the assistant?");
    absorb(v, "Water would have a high priority for the assistant");
    absorb(v, "What is the intention of the assistant in the last utterance?");
    absorb(v, "The intent of the assistant is [Build-Rapport]");
    return v;
}

}  // namespace

const Vocab& shared_vocab() {
    static const Vocab v = make_vocab();
    return v;
}

std::vector<int> render_dialogue_tokens(const Vocab& v, const Dialogue& d, bool swap_roles,
                                        int upto) {
    std::vector<int> out;
    const int count = upto < 0 ? static_cast<int>(d.utterances.size())
                               : std::min<int>(upto, static_cast<int>(d.utterances.size()));
    for (int i = 0; i < count; ++i) {
        const auto& u = d.utterances[static_cast<std::size_t>(i)];
        const bool is_user = (u.speaker == 1) != swap_roles;
        out.push_back(is_user ? v.user : v.assistant);
        for (int t : v.tokenize(u.text)) out.push_back(t);
        out.push_back(v.eou);
    }
    return out;
}

std::uint64_t corpus_fingerprint(const std::vector<Dialogue>& ds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& d : ds) {
        h ^= fnv1a64(d.id);
        h *= 0x100000001b3ULL;
        for (const auto& u : d.utterances) {
            h ^= fnv1a64(u.text);
            h *= 0x100000001b3ULL;
            h ^= static_cast<std::uint64_t>(u.speaker);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

// -- splits ----------------------------------------------------------------------

SplitIndices split_dataset(std::size_t n, std::uint64_t seed) {
    if (n < 10) throw SizeError("split_dataset: need at least 10 items, got " + std::to_string(n));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t n_test = static_cast<std::size_t>(
        std::ceil(0.3 * static_cast<double>(n)) + 1e-9);
    const std::size_t remaining = n - n_test;
    const std::size_t n_val = static_cast<std::size_t>(
        std::ceil(0.2 * static_cast<double>(remaining)) + 1e-9);
    SplitIndices s;
    s.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                 order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
    return s;
}

// -- emission + ingestion ---------------------------------------------------------

namespace {

std::string slot_value(const Priorities& p, Level lv) {
    for (int i = 0; i < kNumItems; ++i)
        if (p[static_cast<std::size_t>(i)] == lv) return item_name(static_cast<Item>(i));
    return "Not Given";
}

json intents_json(const std::vector<Intent>& intents) {
    json arr = json::array();
    for (auto in : intents) arr.push_back(intent_label(in));
    return arr;
}

std::vector<Intent> intents_from_json(const json& arr, std::size_t record_idx) {
    std::vector<Intent> out;
    for (const auto& s : arr) {
        auto in = parse_intent(s.get<std::string>());
        if (!in)
            throw SchemaError("record " + std::to_string(record_idx) + ": unknown intent '" +
                              s.get<std::string>() + "'");
        out.push_back(*in);
    }
    if (out.empty()) out.push_back(Intent::NoIntention);
    return out;
}

void fill_slots(json& rec, const std::string& prefix, const MentalState& ms) {
    rec[prefix + "_desire_high"] = slot_value(ms.desire, Level::High);
    rec[prefix + "_desire_medium"] = slot_value(ms.desire, Level::Medium);
    rec[prefix + "_desire_low"] = slot_value(ms.desire, Level::Low);
    rec[prefix + "_belief_high"] = slot_value(ms.belief, Level::High);
    rec[prefix + "_belief_medium"] = slot_value(ms.belief, Level::Medium);
    rec[prefix + "_belief_low"] = slot_value(ms.belief, Level::Low);
}

void slots_to_state(const json& rec, const std::string& prefix, MentalState& ms,
                    std::size_t record_idx) {
    auto read_slot = [&](const std::string& key, Priorities& p, Level lv) {
        if (!rec.contains(key))
            throw SchemaError("record " + std::to_string(record_idx) + ": missing field " + key);
        const auto val = rec.at(key).get<std::string>();
        if (lower(val) == "not given") return;
        auto item = parse_item(val);
        if (!item)
            throw SchemaError("record " + std::to_string(record_idx) + ": bad item '" + val + "'");
        p[static_cast<std::size_t>(*item)] = lv;
    };
    read_slot(prefix + "_desire_high", ms.desire, Level::High);
    read_slot(prefix + "_desire_medium", ms.desire, Level::Medium);
    read_slot(prefix + "_desire_low", ms.desire, Level::Low);
    read_slot(prefix + "_belief_high", ms.belief, Level::High);
    read_slot(prefix + "_belief_medium", ms.belief, Level::Medium);
    read_slot(prefix + "_belief_low", ms.belief, Level::Low);
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open dataset file: " + path);
    std::vector<json> records;
    std::string line;
    std::size_t idx = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const std::exception& e) {
            throw SchemaError("record " + std::to_string(idx) + ": invalid json: " + e.what());
        }
        ++idx;
    }
    return records;
}

void check_keys(const json& rec, const std::vector<std::string>& required,
                const std::vector<std::string>& optional, std::size_t idx) {
    for (const auto& k : required)
        if (!rec.contains(k))
            throw SchemaError("record " + std::to_string(idx) + ": missing required field '" + k +
                              "'");
    for (auto it = rec.begin(); it != rec.end(); ++it) {
        const std::string& k = it.key();
        if (std::find(required.begin(), required.end(), k) == required.end() &&
            std::find(optional.begin(), optional.end(), k) == optional.end())
            throw SchemaError("record " + std::to_string(idx) + ": unknown field '" + k + "'");
    }
}

}  // namespace

void write_negotiationtom_file(const std::string& path, const std::vector<Dialogue>& ds) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open for write: " + path);
    for (const auto& d : ds) {
        json utterances = json::array();
        for (const auto& u : d.utterances) {
            json rec;
            rec["role"] = u.speaker == 1 ? "agent_1" : "agent_2";
            rec["text"] = u.text;
            rec["agent1_intent"] = intents_json(u.ms1.intents);
            rec["agent2_intent"] = intents_json(u.ms2.intents);
            fill_slots(rec, "agent1", u.ms1);
            fill_slots(rec, "agent2", u.ms2);
            utterances.push_back(std::move(rec));
        }
        out << json{{"id", d.id}, {"dialogue", utterances}}.dump() << "\n";
    }
}

void write_craigslist_file(const std::string& path, const std::vector<Dialogue>& ds) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open for write: " + path);
    for (const auto& d : ds) {
        if (!d.scenario.bargain) throw ContractError("craigslist emission needs bargain info");
        json utterances = json::array();
        for (const auto& u : d.utterances)
            utterances.push_back(json::array({u.speaker == 1 ? "seller" : "buyer", u.text}));
        out << json{{"id", d.id},
                    {"category", d.scenario.bargain->category},
                    {"dialogue", utterances},
                    {"seller_price", d.scenario.bargain->seller_price},
                    {"buyer_price", d.scenario.bargain->buyer_price}}
                   .dump()
            << "\n";
    }
}

void write_markers_file(const std::string& path, const std::vector<Dialogue>& ds) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open for write: " + path);
    for (const auto& d : ds) {
        json scen;
        scen["seed"] = d.scenario.seed;
        json d1, d2;
        for (int i = 0; i < kNumItems; ++i) {
            d1[item_word(static_cast<Item>(i))] =
                level_name(d.scenario.desire1[static_cast<std::size_t>(i)]);
            d2[item_word(static_cast<Item>(i))] =
                level_name(d.scenario.desire2[static_cast<std::size_t>(i)]);
        }
        scen["agent1_desire"] = d1;
        scen["agent2_desire"] = d2;
        if (d.scenario.bargain) {
            scen["bargain"] = json{{"category", d.scenario.bargain->category},
                                   {"listing_price", d.scenario.bargain->listing_price},
                                   {"seller_price", d.scenario.bargain->seller_price},
                                   {"buyer_price", d.scenario.bargain->buyer_price}};
        }
        json utts = json::array();
        for (const auto& u : d.utterances) {
            json reveals = json::array();
            for (const auto& rv : u.reveals)
                reveals.push_back(json{{"agent", rv.agent},
                                       {"item", item_word(rv.item)},
                                       {"level", level_name(rv.level)}});
            utts.push_back(json{{"intents", intents_json(u.intents)}, {"reveals", reveals}});
        }
        out << json{{"id", d.id}, {"scenario", scen}, {"utterances", utts}}.dump() << "\n";
    }
}

namespace {

Priorities priorities_from_json(const json& j, std::size_t idx) {
    Priorities p{Level::NotGiven, Level::NotGiven, Level::NotGiven};
    for (int i = 0; i < kNumItems; ++i) {
        const auto word = item_word(static_cast<Item>(i));
        if (!j.contains(word))
            throw SchemaError("record " + std::to_string(idx) + ": missing priority for " + word);
        auto lv = parse_level(j.at(word).get<std::string>());
        if (!lv)
            throw SchemaError("record " + std::to_string(idx) + ": bad level '" +
                              j.at(word).get<std::string>() + "'");
        p[static_cast<std::size_t>(i)] = *lv;
    }
    return p;
}

}  // namespace

std::vector<Dialogue> load_synthetic_corpus(const std::string& ntm_path,
                                            const std::string& markers_path) {
    auto dialogues = ingest_dataset(DatasetKind::NegotiationTom, ntm_path);
    auto marker_records = read_jsonl(markers_path);
    if (marker_records.size() != dialogues.size())
        throw SchemaError("markers file does not match corpus size");
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
        auto& d = dialogues[i];
        const auto& mrec = marker_records[i];
        if (mrec.at("id").get<std::string>() != d.id)
            throw SchemaError("markers record " + std::to_string(i) + " id mismatch");
        const auto& scen = mrec.at("scenario");
        d.scenario.seed = scen.at("seed").get<std::uint64_t>();
        d.scenario.desire1 = priorities_from_json(scen.at("agent1_desire"), i);
        d.scenario.desire2 = priorities_from_json(scen.at("agent2_desire"), i);
        if (scen.contains("bargain")) {
            BargainInfo b;
            b.category = scen.at("bargain").at("category").get<std::string>();
            b.listing_price = scen.at("bargain").at("listing_price").get<int>();
            b.seller_price = scen.at("bargain").at("seller_price").get<int>();
            b.buyer_price = scen.at("bargain").at("buyer_price").get<int>();
            d.scenario.bargain = b;
        }
        const auto& utts = mrec.at("utterances");
        if (utts.size() != d.utterances.size())
            throw SchemaError("markers record " + std::to_string(i) + " utterance count mismatch");
        for (std::size_t u = 0; u < d.utterances.size(); ++u) {
            auto& utt = d.utterances[u];
            utt.intents = intents_from_json(utts[u].at("intents"), i);
            utt.reveals.clear();
            for (const auto& rv : utts[u].at("reveals")) {
                Reveal r;
                r.agent = rv.at("agent").get<int>();
                r.item = *parse_item(rv.at("item").get<std::string>());
                r.level = *parse_level(rv.at("level").get<std::string>());
                utt.reveals.push_back(r);
            }
        }
        d.source = "synthetic";
    }
    return dialogues;
}

std::vector<Dialogue> load_synthetic_bargain(const std::string& craigslist_path,
                                             const std::string& markers_path) {
    auto dialogues = ingest_dataset(DatasetKind::Craigslist, craigslist_path);
    auto marker_records = read_jsonl(markers_path);
    if (marker_records.size() != dialogues.size())
        throw SchemaError("markers file does not match corpus size");
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
        auto& d = dialogues[i];
        const auto& scen = marker_records[i].at("scenario");
        d.scenario.seed = scen.at("seed").get<std::uint64_t>();
        if (scen.contains("bargain") && d.scenario.bargain)
            d.scenario.bargain->listing_price = scen.at("bargain").at("listing_price").get<int>();
        d.source = "synthetic";
    }
    return dialogues;
}

std::vector<Dialogue> ingest_dataset(DatasetKind kind, const std::string& path) {
    const auto records = read_jsonl(path);
    std::vector<Dialogue> out;
    for (std::size_t idx = 0; idx < records.size(); ++idx) {
        const auto& rec = records[idx];
        Dialogue d;
        switch (kind) {
            case DatasetKind::Casino: {
                check_keys(rec, {"dialogue", "agent1_priorities", "agent2_priorities"}, {"id"}, idx);
                d.source = "casino";
                d.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                          : "casino-" + std::to_string(idx);
                d.scenario.desire1 = priorities_from_json(rec.at("agent1_priorities"), idx);
                d.scenario.desire2 = priorities_from_json(rec.at("agent2_priorities"), idx);
                for (const auto& line : rec.at("dialogue")) {
                    if (!line.is_array() || line.size() != 2)
                        throw SchemaError("record " + std::to_string(idx) +
                                          ": dialogue entries must be [role, text]");
                    Utterance u;
                    u.speaker = line[0].get<std::string>() == "agent_1" ? 1 : 2;
                    u.text = line[1].get<std::string>();
                    u.ms1.agent = 1;
                    u.ms2.agent = 2;
                    d.utterances.push_back(std::move(u));
                }
                break;
            }
            case DatasetKind::Craigslist: {
                check_keys(rec, {"category", "dialogue", "seller_price", "buyer_price"}, {"id"},
                           idx);
                d.source = "craigslist";
                d.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                          : "craigslist-" + std::to_string(idx);
                BargainInfo b;
                b.category = rec.at("category").get<std::string>();
                b.seller_price = rec.at("seller_price").get<int>();
                b.buyer_price = rec.at("buyer_price").get<int>();
                b.listing_price = std::max(b.seller_price, b.buyer_price);
                if (b.seller_price <= 0 || b.buyer_price <= 0)
                    throw SchemaError("record " + std::to_string(idx) + ": prices must be > 0");
                d.scenario.bargain = b;
                for (const auto& line : rec.at("dialogue")) {
                    if (!line.is_array() || line.size() != 2)
                        throw SchemaError("record " + std::to_string(idx) +
                                          ": dialogue entries must be [role, text]");
                    Utterance u;
                    u.speaker = line[0].get<std::string>() == "seller" ? 1 : 2;
                    u.text = line[1].get<std::string>();
                    u.ms1.agent = 1;
                    u.ms2.agent = 2;
                    d.utterances.push_back(std::move(u));
                }
                break;
            }
            case DatasetKind::NegotiationTom: {
                check_keys(rec, {"dialogue"}, {"id"}, idx);
                d.source = "negotiationtom";
                d.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                          : "ntm-" + std::to_string(idx);
                for (const auto& line : rec.at("dialogue")) {
                    check_keys(line,
                               {"role", "text", "agent1_intent", "agent2_intent",
                                "agent1_desire_high", "agent1_desire_medium", "agent1_desire_low",
                                "agent1_belief_high", "agent1_belief_medium", "agent1_belief_low",
                                "agent2_desire_high", "agent2_desire_medium", "agent2_desire_low",
                                "agent2_belief_high", "agent2_belief_medium", "agent2_belief_low"},
                               {}, idx);
                    Utterance u;
                    u.speaker = line.at("role").get<std::string>() == "agent_1" ? 1 : 2;
                    u.text = line.at("text").get<std::string>();
                    u.ms1.agent = 1;
                    u.ms2.agent = 2;
                    u.ms1.intents = intents_from_json(line.at("agent1_intent"), idx);
                    u.ms2.intents = intents_from_json(line.at("agent2_intent"), idx);
                    slots_to_state(line, "agent1", u.ms1, idx);
                    slots_to_state(line, "agent2", u.ms2, idx);
                    u.intents = u.speaker == 1 ? u.ms1.intents : u.ms2.intents;
                    d.utterances.push_back(std::move(u));
                }
                // Scenario desires: final expressed snapshot (complete when the
                // dialogue revealed everything).
                if (!d.utterances.empty()) {
                    d.scenario.desire1 = d.utterances.back().ms1.desire;
                    d.scenario.desire2 = d.utterances.back().ms2.desire;
                }
                break;
            }
            case DatasetKind::Fantom: {
                check_keys(rec, {"conversation", "questions"}, {"id"}, idx);
                d.source = "fantom";
                d.id = rec.contains("id") ? rec.at("id").get<std::string>()
                                          : "fantom-" + std::to_string(idx);
                int turn = 0;
                for (const auto& line : rec.at("conversation")) {
                    Utterance u;
                    u.speaker = turn % 2 == 0 ? 1 : 2;
                    u.text = line.get<std::string>();
                    u.ms1.agent = 1;
                    u.ms2.agent = 2;
                    d.utterances.push_back(std::move(u));
                    ++turn;
                }
                break;
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "casino") return DatasetKind::Casino;
    if (s == "craigslist") return DatasetKind::Craigslist;
    if (s == "fantom") return DatasetKind::Fantom;
    if (s == "negotiationtom") return DatasetKind::NegotiationTom;
    throw DomainError("unknown dataset kind: " + s);
}

// -- QA templates -----------------------------------------------------------------

namespace {

std::string intent_list_string(const std::vector<Intent>& intents) {
    std::string out;
    for (std::size_t i = 0; i < intents.size(); ++i) {
        if (i) out += ",";
        out += intent_label(intents[i]);
    }
    return out;
}

std::string priorities_or_throw(const Priorities& p, const std::string& slot) {
    for (int i = 0; i < kNumItems; ++i)
        if (p[static_cast<std::size_t>(i)] == Level::NotGiven)
            throw TemplateError("missing label for slot: " + slot);
    return "";
}

}  // namespace

NtmLabels ntm_labels_from_state(const MentalState& ms1, const MentalState& ms2) {
    NtmLabels out;
    out.ok = true;
    for (auto in : ms1.intents) out.intent1.push_back(intent_label(in));
    for (auto in : ms2.intents) out.intent2.push_back(intent_label(in));
    out.agent1 = {slot_value(ms1.desire, Level::High),  slot_value(ms1.desire, Level::Medium),
                  slot_value(ms1.desire, Level::Low),   slot_value(ms1.belief, Level::High),
                  slot_value(ms1.belief, Level::Medium), slot_value(ms1.belief, Level::Low)};
    out.agent2 = {slot_value(ms2.desire, Level::High),  slot_value(ms2.desire, Level::Medium),
                  slot_value(ms2.desire, Level::Low),   slot_value(ms2.belief, Level::High),
                  slot_value(ms2.belief, Level::Medium), slot_value(ms2.belief, Level::Low)};
    return out;
}

QAPair make_qa_pair(const Dialogue& d, QaTemplate tmpl) {
    QAPair qa;
    qa.dialogue_id = d.id;
    qa.kind = "readout";
    switch (tmpl) {
        case QaTemplate::Casino: {
            priorities_or_throw(d.scenario.desire1, "agent1_priorities");
            priorities_or_throw(d.scenario.desire2, "agent2_priorities");
            qa.component = "desire";
            qa.question =
                "How much priority does the assistant and the user assign to different items?";
            auto levels = [](const Priorities& p, Item it) {
                return level_name(p[static_cast<std::size_t>(it)]);
            };
            std::string a = "For the user: The priority for food, water and firewood are "
                            "respectively " +
                            levels(d.scenario.desire1, Item::Food) + ", " +
                            levels(d.scenario.desire1, Item::Water) + " and " +
                            levels(d.scenario.desire1, Item::Firewood) + ".";
            a += " For the assistant: The priority for food, water and firewood are respectively " +
                 levels(d.scenario.desire2, Item::Food) + ", " +
                 levels(d.scenario.desire2, Item::Water) + " and " +
                 levels(d.scenario.desire2, Item::Firewood) + ".";
            qa.answer = a;
            break;
        }
        case QaTemplate::Craigslist: {
            if (!d.scenario.bargain) throw TemplateError("missing label for slot: seller_price");
            qa.component = "price";
            qa.question = "They were bargaining over a " + d.scenario.bargain->category +
                          ". What are the offered prices each party has in mind?";
            qa.answer = "The offered price of the seller is " +
                        std::to_string(d.scenario.bargain->seller_price) + ", and the buyer's is " +
                        std::to_string(d.scenario.bargain->buyer_price) + " dollars.";
            break;
        }
        case QaTemplate::NegotiationTom: {
            if (d.utterances.empty()) throw TemplateError("missing label for slot: dialogue");
            qa.component = "mixed";
            qa.question = "What is the intent of each agent for the last utterances? What are the "
                          "beliefs and desires of each agent?";
            const auto& last = d.utterances.back();
            auto slots = [&](const MentalState& ms) {
                return "Desire High: " + slot_value(ms.desire, Level::High) +
                       ", Desire Medium: " + slot_value(ms.desire, Level::Medium) +
                       ", Desire Low: " + slot_value(ms.desire, Level::Low) +
                       ", Belief High: " + slot_value(ms.belief, Level::High) +
                       ", Belief Medium: " + slot_value(ms.belief, Level::Medium) +
                       ", Belief Low: " + slot_value(ms.belief, Level::Low);
            };
            std::string a = "The intent of the Agent 1 is [" + intent_list_string(last.ms1.intents) +
                            "] and the intent of the Agent 2 is [" +
                            intent_list_string(last.ms2.intents) + "]";
            a += " Regarding the Agent 1, " + slots(last.ms1) + ".";
            a += " Regarding the Agent 2, " + slots(last.ms2) + ".";
            qa.answer = a;
            break;
        }
    }
    return qa;
}

QAPair make_steering_qa(const std::string& component, const std::string& label) {
    QAPair qa;
    qa.kind = "steering-control";
    qa.component = component;
    if (component == "belief" || component == "desire") {
        auto item = parse_item(label);
        if (!item) throw DomainError("label '" + label + "' is not a picnic item");
        const std::string name = item_name(*item);
        if (component == "belief") {
            qa.question = "What item does the assistant believe would have high priority for the "
                          "user?";
            qa.answer = "The assistant believes " + name + " would have a high priority for the "
                        "user.";
        } else {
            qa.question = "What item would have high priority for the assistant?";
            qa.answer = name + " would have a high priority for the assistant";
        }
    } else if (component == "intention") {
        auto in = parse_intent(label);
        if (!in) throw DomainError("label '" + label + "' is not an intention");
        qa.question = "What is the intention of the assistant in the last utterance?";
        qa.answer = "The intent of the assistant is [" + intent_label(*in) + "]";
    } else {
        throw DomainError("unknown steering component: " + component);
    }
    return qa;
}

// -- answer parsing -----------------------------------------------------------------

namespace {

std::vector<std::string> canon_tokens(const std::string& text) { return split_words(text); }

// Finds `pattern` (a short token sequence) in `toks` starting at `from`;
// returns index past the match or npos.
std::size_t find_seq(const std::vector<std::string>& toks, const std::vector<std::string>& pattern,
                     std::size_t from) {
    if (pattern.empty() || toks.size() < pattern.size()) return std::string::npos;
    for (std::size_t i = from; i + pattern.size() <= toks.size(); ++i) {
        bool match = true;
        for (std::size_t j = 0; j < pattern.size(); ++j)
            if (toks[i + j] != pattern[j]) { match = false; break; }
        if (match) return i + pattern.size();
    }
    return std::string::npos;
}

// Reads a slot value (item name or "not given") following "<slot words> :".
std::string read_slot_value(const std::vector<std::string>& toks, std::size_t pos) {
    if (pos >= toks.size()) return "";
    if (toks[pos] == "not" && pos + 1 < toks.size() && toks[pos + 1] == "given") return "Not Given";
    auto item = parse_item(toks[pos]);
    if (item) return item_name(*item);
    return "";
}

std::vector<std::string> read_bracket_list(const std::vector<std::string>& toks,
                                           std::size_t& pos) {
    std::vector<std::string> out;
    while (pos < toks.size() && toks[pos] != "[") ++pos;
    if (pos >= toks.size()) return out;
    ++pos;
    std::string current;
    while (pos < toks.size() && toks[pos] != "]") {
        if (toks[pos] == ",") {
            if (!current.empty()) out.push_back(current);
            current.clear();
        } else {
            auto in = parse_intent(toks[pos]);
            current = in ? intent_label(*in) : toks[pos];
        }
        ++pos;
    }
    if (!current.empty()) out.push_back(current);
    if (pos < toks.size()) ++pos;  // skip ']'
    return out;
}

}  // namespace

NtmLabels parse_negotiationtom_answer(const std::string& text) {
    NtmLabels out;
    const auto toks = canon_tokens(text);
    std::size_t pos = 0;
    out.intent1 = read_bracket_list(toks, pos);
    out.intent2 = read_bracket_list(toks, pos);
    if (out.intent1.empty() || out.intent2.empty()) return out;

    const std::vector<std::pair<std::vector<std::string>, int>> slot_patterns = {
        {{"desire", "high", ":"}, 0},  {{"desire", "medium", ":"}, 1},
        {{"desire", "low", ":"}, 2},   {{"belief", "high", ":"}, 3},
        {{"belief", "medium", ":"}, 4}, {{"belief", "low", ":"}, 5},
    };
    std::size_t agent_pos = find_seq(toks, {"regarding", "the", "agent", "1"}, 0);
    if (agent_pos == std::string::npos) return out;
    std::size_t agent2_pos = find_seq(toks, {"regarding", "the", "agent", "2"}, agent_pos);
    if (agent2_pos == std::string::npos) return out;

    auto read_agent = [&](std::size_t start, std::size_t end, std::array<std::string, 6>& slots) {
        for (const auto& [pattern, slot] : slot_patterns) {
            std::size_t p = find_seq(toks, pattern, start);
            if (p == std::string::npos || p >= end) return false;
            const auto val = read_slot_value(toks, p);
            if (val.empty()) return false;
            slots[static_cast<std::size_t>(slot)] = val;
        }
        return true;
    };
    if (!read_agent(agent_pos, agent2_pos, out.agent1)) return out;
    if (!read_agent(agent2_pos, toks.size(), out.agent2)) return out;
    out.ok = true;
    return out;
}

CasinoLabels parse_casino_answer(const std::string& text) {
    CasinoLabels out;
    const auto toks = canon_tokens(text);
    auto read_block = [&](std::size_t start, std::array<std::string, 3>& slots) -> std::size_t {
        // "... the priority for food , water and firewood are respectively X , Y and Z ."
        std::size_t p = find_seq(toks, {"respectively"}, start);
        if (p == std::string::npos) return std::string::npos;
        std::vector<std::string> levels;
        while (p < toks.size() && levels.size() < 3) {
            auto lv = parse_level(toks[p]);
            if (lv && *lv != Level::NotGiven) levels.push_back(level_name(*lv));
            if (toks[p] == ".") break;
            ++p;
        }
        if (levels.size() != 3) return std::string::npos;
        for (int i = 0; i < 3; ++i) slots[static_cast<std::size_t>(i)] = levels[static_cast<std::size_t>(i)];
        return p;
    };
    std::size_t user_pos = find_seq(toks, {"for", "the", "user", ":"}, 0);
    if (user_pos == std::string::npos) return out;
    std::size_t next = read_block(user_pos, out.user);
    if (next == std::string::npos) return out;
    std::size_t asst_pos = find_seq(toks, {"for", "the", "assistant", ":"}, next);
    if (asst_pos == std::string::npos) return out;
    if (read_block(asst_pos, out.assistant) == std::string::npos) return out;
    out.ok = true;
    return out;
}

PriceLabels parse_craigslist_answer(const std::string& text) {
    PriceLabels out;
    const auto toks = canon_tokens(text);
    std::size_t p = find_seq(toks, {"seller", "is"}, 0);
    if (p == std::string::npos || p >= toks.size()) return out;
    try {
        out.seller = std::stoi(toks[p]);
    } catch (...) { return out; }
    std::size_t q = find_seq(toks, {"buyer", "'", "s", "is"}, p);
    if (q == std::string::npos) q = find_seq(toks, {"is"}, p + 1);
    if (q == std::string::npos || q >= toks.size()) return out;
    try {
        out.buyer = std::stoi(toks[q]);
    } catch (...) { return out; }
    out.ok = true;
    return out;
}

// -- chain-of-thought --------------------------------------------------------------

namespace {

const char* kCotTaskPrompt = R"(Background: Here is a negotiation conversation for a camping trip.
There are two agents who own some basic supplies and negotiate with each other to split the additional food packages, water bottles, and firewood to make their camping trip even better.
Each of these items will be of either High, Medium, or Low priority for these two agents.
Each of the additional items only has an available quantity of 3.
Given this information and the template, answer the questions by writing step-by-step thinking process between `$`s and filling in the intentions list of the agents marked by `[]` using values from the intentions set.
Finally, select the proper item from values between `{}`
****
Intentions list: {
    Build-Rapport, Show-Empathy, Promote-Coordination, Callout-Fairness, Undermine-Requirements, Discover-Preference, Describe-Need, No-Need, NoIntention
}
****
Reason:
$
Reasoning Step by Step
$
****
Response Template:
The intent of the Agent 1 is [Intent1,Intent2, ...] and the intent of the Agent 2 is [Intent1,Intent2, ...].
Regarding the Agent 1, Desire High: {Water|Food|Firewood}, Desire Medium: {Water|Food|Firewood}, Desire Low: {Water|Food|Firewood}, Belief High: {Water|Food|Firewood}, Belief Medium: {Water|Food|Firewood}, Belief Low: {Water|Food|Firewood}.
Regarding the Agent 2, Desire High: {Water|Food|Firewood}, Desire Medium: {Water|Food|Firewood}, Desire Low: {Water|Food|Firewood}, Belief High: {Water|Food|Firewood}, Belief Medium: {Water|Food|Firewood}, Belief Low: {Water|Food|Firewood}.
)";

std::string dialogue_history_text(const Dialogue& d) {
    std::string out = "[";
    for (std::size_t i = 0; i < d.utterances.size(); ++i) {
        const auto& u = d.utterances[i];
        if (i) out += ", ";
        out += "{'role': '";
        out += u.speaker == 1 ? "Agent 1" : "Agent 2";
        out += "', 'content': '" + u.text + "'}";
    }
    out += "]";
    return out;
}

std::string cot_question(const Dialogue& d) {
    return "\nDialogue History: \n" + dialogue_history_text(d) +
           "\nQuestion:\nwhat is the intent of each agent for the last utterances? What are the "
           "beliefs and desires of each agent?\n";
}

}  // namespace

std::vector<ChatMessage> build_cot_prompt(const Dialogue& d) {
    std::vector<ChatMessage> msgs;
    msgs.push_back({"system", kCotTaskPrompt});
    // Seven fixed exemplars rendered from the generator so the prompt is
    // deterministic and self-contained.
    for (int i = 0; i < 7; ++i) {
        const auto seed = static_cast<std::uint64_t>(9000 + i);
        auto scen = generate_scenario(seed);
        auto ex = render_dialogue(scen, 6 + (i % 3) * 2, seed);
        auto qa = make_qa_pair(ex, QaTemplate::NegotiationTom);
        msgs.push_back({"user", cot_question(ex)});
        msgs.push_back({"assistant", "\n" + qa.answer + "\n"});
    }
    msgs.push_back({"user", cot_question(d)});
    return msgs;
}

std::string chat_to_text(const std::vector<ChatMessage>& msgs) {
    std::string out;
    for (const auto& m : msgs) out += "<" + m.role + ">\n" + m.content + "\n";
    return out;
}

// -- controllability samples ----------------------------------------------------------

std::vector<ControllabilitySample> select_control_samples(const std::vector<Dialogue>& dialogues,
                                                          const std::string& component) {
    if (component != "belief" && component != "desire" && component != "intention")
        throw DomainError("unknown controllability component: " + component);
    std::vector<ControllabilitySample> out;
    for (std::size_t di = 0; di < dialogues.size(); ++di) {
        const auto& d = dialogues[di];
        const int n = static_cast<int>(d.utterances.size());
        // Updates are defined by mental-state transitions between consecutive
        // utterances, so the selection works on ingested labeled data as well
        // as on generator output.
        for (int t = 0; t < n; ++t) {
            const auto& u = d.utterances[static_cast<std::size_t>(t)];
            const Utterance* prev = t > 0 ? &d.utterances[static_cast<std::size_t>(t - 1)] : nullptr;
            auto became_high = [&](const Priorities& now, const Priorities& before,
                                   std::vector<Item>& items) {
                for (int i = 0; i < kNumItems; ++i) {
                    const auto idx = static_cast<std::size_t>(i);
                    if (now[idx] == Level::High && (!prev || before[idx] != Level::High))
                        items.push_back(static_cast<Item>(i));
                }
            };
            if (component == "belief") {
                // Reference = the utterance immediately following a belief
                // update; the agent whose belief updated speaks next.
                for (int agent = 1; agent <= 2; ++agent) {
                    const MentalState& now = agent == 1 ? u.ms1 : u.ms2;
                    const MentalState& before = !prev           ? now
                                                : agent == 1    ? prev->ms1
                                                                : prev->ms2;
                    std::vector<Item> items;
                    became_high(now.belief, before.belief, items);
                    const int j = t + 2;  // 1-based index of the following utterance
                    if (j <= 1 || j >= n) continue;
                    if (d.utterances[static_cast<std::size_t>(t + 1)].speaker != agent) continue;
                    for (auto item : items) {
                        ControllabilitySample cs;
                        cs.dialogue_index = di;
                        cs.dialogue_id = d.id;
                        cs.j = j;
                        cs.component = "belief";
                        cs.target_label = item_name(item);
                        cs.assistant_agent = agent;
                        out.push_back(cs);
                    }
                }
            } else if (component == "desire") {
                // Reference = the utterance that carries (introduces) the
                // desire-high label.
                const MentalState& now = u.speaker == 1 ? u.ms1 : u.ms2;
                const MentalState& before = !prev             ? now
                                            : u.speaker == 1 ? prev->ms1
                                                             : prev->ms2;
                std::vector<Item> items;
                became_high(now.desire, before.desire, items);
                const int j = t + 1;
                if (j <= 1 || j >= n) continue;
                for (auto item : items) {
                    ControllabilitySample cs;
                    cs.dialogue_index = di;
                    cs.dialogue_id = d.id;
                    cs.j = j;
                    cs.component = "desire";
                    cs.target_label = item_name(item);
                    cs.assistant_agent = u.speaker;
                    out.push_back(cs);
                }
            } else {
                const int j = t + 1;
                if (j <= 1 || j >= n) continue;
                for (auto in : u.intents) {
                    if (in == Intent::NoIntention) continue;
                    ControllabilitySample cs;
                    cs.dialogue_index = di;
                    cs.dialogue_id = d.id;
                    cs.j = j;
                    cs.component = "intention";
                    cs.target_label = intent_label(in);
                    cs.assistant_agent = u.speaker;
                    out.push_back(cs);
                }
            }
        }
    }
    return out;
}

}  // namespace tomlab::corpus
