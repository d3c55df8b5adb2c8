#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "tomlab/corpus.hpp"

using namespace tomlab;
using namespace tomlab::corpus;

namespace {

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "tomlab_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

bool same_intents(const std::vector<Intent>& a, const std::vector<Intent>& b) {
    return std::set<Intent>(a.begin(), a.end()) == std::set<Intent>(b.begin(), b.end());
}

}  // namespace

TEST_CASE("generate_scenario is deterministic and constrained") {
    auto a = generate_scenario(123);
    auto b = generate_scenario(123);
    CHECK(a.desire1 == b.desire1);
    CHECK(a.desire2 == b.desire2);
    REQUIRE(a.bargain.has_value());
    CHECK(a.bargain->category == b.bargain->category);
    CHECK(a.bargain->listing_price == b.bargain->listing_price);
    CHECK(a.bargain->buyer_price <= a.bargain->listing_price);
    CHECK(a.bargain->buyer_price <= a.bargain->seller_price);
    CHECK(a.bargain->buyer_price > 0);
    CHECK(a.bargain->listing_price >= 50);
    CHECK(a.bargain->listing_price <= 500);
}

TEST_CASE("scenario priorities are uniform over the six permutations") {
    std::map<std::array<Level, 3>, int> counts;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
        auto s = generate_scenario(seed);
        counts[s.desire1] += 1;
        std::set<Level> seen(s.desire1.begin(), s.desire1.end());
        CHECK(seen.size() == 3);
        CHECK(seen.count(Level::NotGiven) == 0);
    }
    CHECK(counts.size() == 6);
    for (const auto& [perm, count] : counts) {
        CHECK(count >= 60);
        CHECK(count <= 140);
    }
}

TEST_CASE("first exchange carries Build-Rapport") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 10, seed);
        const bool br1 = std::find(d.utterances[0].intents.begin(), d.utterances[0].intents.end(),
                                   Intent::BuildRapport) != d.utterances[0].intents.end();
        const bool br2 = std::find(d.utterances[1].intents.begin(), d.utterances[1].intents.end(),
                                   Intent::BuildRapport) != d.utterances[1].intents.end();
        CHECK((br1 || br2));
    }
}

TEST_CASE("reveals update the listener's next belief snapshot") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 12, seed);
        for (std::size_t t = 0; t + 1 < d.utterances.size(); ++t) {
            for (const auto& rv : d.utterances[t].reveals) {
                const auto& next = d.utterances[t + 1];
                const MentalState& listener = rv.agent == 1 ? next.ms2 : next.ms1;
                CHECK(listener.belief[static_cast<std::size_t>(rv.item)] == rv.level);
            }
        }
    }
}

TEST_CASE("marker re-parse recovers generator labels exactly") {
    int utterances_checked = 0;
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        const int turns = 10 + 2 * static_cast<int>(seed % 2);
        auto d = render_dialogue(generate_scenario(seed), turns, seed);
        for (const auto& u : d.utterances) {
            auto parsed = parse_utterance_markers(u.text);
            INFO("seed " << seed << " text: " << u.text);
            CHECK(same_intents(parsed.intents, u.intents));
            REQUIRE(parsed.reveals.size() == u.reveals.size());
            for (std::size_t i = 0; i < u.reveals.size(); ++i) {
                CHECK(parsed.reveals[i].first == u.reveals[i].item);
                CHECK(parsed.reveals[i].second == u.reveals[i].level);
            }
            ++utterances_checked;
        }
    }
    CHECK(utterances_checked > 500);
}

TEST_CASE("dialogues alternate roles and keep intent invariants") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 12, seed);
        for (std::size_t t = 0; t < d.utterances.size(); ++t) {
            const auto& u = d.utterances[t];
            CHECK(u.speaker == (t % 2 == 0 ? 1 : 2));
            CHECK(!u.intents.empty());
            if (std::find(u.intents.begin(), u.intents.end(), Intent::NoIntention) !=
                u.intents.end())
                CHECK(u.intents.size() == 1);
        }
    }
    CHECK_THROWS_AS(render_dialogue(generate_scenario(1), 3, 1), ContractError);
}

TEST_CASE("twelve-turn dialogues reveal both agents' full priorities") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 12, seed);
        const auto& last = d.utterances.back();
        for (int i = 0; i < kNumItems; ++i) {
            CHECK(last.ms1.desire[static_cast<std::size_t>(i)] ==
                  d.scenario.desire1[static_cast<std::size_t>(i)]);
            CHECK(last.ms2.desire[static_cast<std::size_t>(i)] ==
                  d.scenario.desire2[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("split_dataset proportions and determinism") {
    auto s = split_dataset(100, 42);
    CHECK(s.train.size() == 56);
    CHECK(s.val.size() == 14);
    CHECK(s.test.size() == 30);

    auto s2 = split_dataset(100, 42);
    CHECK(s.train == s2.train);
    CHECK(s.val == s2.val);
    CHECK(s.test == s2.test);

    auto small = split_dataset(10, 42);
    CHECK(small.train.size() == 5);
    CHECK(small.val.size() == 2);
    CHECK(small.test.size() == 3);

    CHECK_THROWS_AS(split_dataset(9, 42), SizeError);

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = static_cast<std::size_t>(rng.uniform_int(10, 500));
        auto sp = split_dataset(n, rng.next_u64());
        std::set<std::size_t> all;
        for (auto i : sp.train) all.insert(i);
        for (auto i : sp.val) all.insert(i);
        for (auto i : sp.test) all.insert(i);
        CHECK(all.size() == n);
        CHECK(sp.train.size() + sp.val.size() + sp.test.size() == n);
        CHECK(*all.rbegin() == n - 1);
    }
}

TEST_CASE("casino QA template renders slot-for-slot") {
    Scenario s = generate_scenario(5);
    s.desire1 = {Level::High, Level::Low, Level::Medium};  // food, water, firewood
    s.desire2 = {Level::Low, Level::High, Level::Medium};
    auto d = render_dialogue(s, 10, 5);
    auto qa = make_qa_pair(d, QaTemplate::Casino);
    CHECK(qa.question ==
          "How much priority does the assistant and the user assign to different items?");
    CHECK(qa.answer ==
          "For the user: The priority for food, water and firewood are respectively High, Low and "
          "Medium. For the assistant: The priority for food, water and firewood are respectively "
          "Low, High and Medium.");
    auto parsed = parse_casino_answer(qa.answer);
    REQUIRE(parsed.ok);
    CHECK(parsed.user[0] == "High");
    CHECK(parsed.user[1] == "Low");
    CHECK(parsed.user[2] == "Medium");
    CHECK(parsed.assistant[1] == "High");
}

TEST_CASE("craigslist QA template") {
    Scenario s = generate_scenario(6);
    s.bargain->category = "couch";
    s.bargain->seller_price = 120;
    s.bargain->buyer_price = 100;
    auto d = render_bargain_dialogue(s, 6);
    auto qa = make_qa_pair(d, QaTemplate::Craigslist);
    CHECK(qa.question ==
          "They were bargaining over a couch. What are the offered prices each party has in mind?");
    CHECK(qa.answer == "The offered price of the seller is 120, and the buyer's is 100 dollars.");
    auto parsed = parse_craigslist_answer(qa.answer);
    REQUIRE(parsed.ok);
    CHECK(parsed.seller == 120);
    CHECK(parsed.buyer == 100);
}

TEST_CASE("negotiationtom QA template and answer round-trip") {
    auto d = render_dialogue(generate_scenario(9), 12, 9);
    auto qa = make_qa_pair(d, QaTemplate::NegotiationTom);
    CHECK(qa.question ==
          "What is the intent of each agent for the last utterances? What are the beliefs and "
          "desires of each agent?");
    auto parsed = parse_negotiationtom_answer(qa.answer);
    REQUIRE(parsed.ok);
    const auto& last = d.utterances.back();
    auto gold = ntm_labels_from_state(last.ms1, last.ms2);
    CHECK(parsed.intent1 == gold.intent1);
    CHECK(parsed.intent2 == gold.intent2);
    CHECK(parsed.agent1 == gold.agent1);
    CHECK(parsed.agent2 == gold.agent2);
}

TEST_CASE("negotiationtom answer renders Not Given for empty labels") {
    Scenario s = generate_scenario(4);
    auto d = render_dialogue(s, 10, 4);
    Dialogue d2 = d;
    d2.utterances.resize(1);
    auto qa = make_qa_pair(d2, QaTemplate::NegotiationTom);
    CHECK(qa.answer.find("Not Given") != std::string::npos);
}

TEST_CASE("steering QA templates") {
    auto belief = make_steering_qa("belief", "Water");
    CHECK(belief.question ==
          "What item does the assistant believe would have high priority for the user?");
    CHECK(belief.answer ==
          "The assistant believes Water would have a high priority for the user.");

    auto desire = make_steering_qa("desire", "Water");
    CHECK(desire.question == "What item would have high priority for the assistant?");
    CHECK(desire.answer == "Water would have a high priority for the assistant");

    auto intent = make_steering_qa("intention", "Show-Empathy");
    CHECK(intent.answer == "The intent of the assistant is [Show-Empathy]");

    CHECK_THROWS_AS(make_steering_qa("desire", "Chocolate"), DomainError);
}

TEST_CASE("cot prompt structure") {
    auto d = render_dialogue(generate_scenario(2), 10, 2);
    auto msgs = build_cot_prompt(d);
    REQUIRE(msgs.size() == 1 + 7 * 2 + 1);
    CHECK(msgs[0].role == "system");
    CHECK(msgs[0].content.find("Build-Rapport, Show-Empathy, Promote-Coordination, "
                               "Callout-Fairness, Undermine-Requirements, Discover-Preference, "
                               "Describe-Need, No-Need, NoIntention") != std::string::npos);
    int exemplars = 0;
    for (std::size_t i = 1; i + 1 < msgs.size(); i += 2) {
        CHECK(msgs[i].role == "user");
        CHECK(msgs[i + 1].role == "assistant");
        ++exemplars;
    }
    CHECK(exemplars == 7);
    CHECK(msgs.back().role == "user");

    auto msgs2 = build_cot_prompt(d);
    CHECK(chat_to_text(msgs) == chat_to_text(msgs2));
}

TEST_CASE("controllability sample selection") {
    std::vector<Dialogue> ds;
    for (std::uint64_t seed = 1; seed <= 25; ++seed)
        ds.push_back(render_dialogue(generate_scenario(seed), 12, seed));

    for (const auto* component : {"belief", "desire", "intention"}) {
        auto samples = select_control_samples(ds, component);
        CHECK(!samples.empty());
        for (const auto& cs : samples) {
            const auto& d = ds[cs.dialogue_index];
            CHECK(cs.j > 1);
            CHECK(cs.j < static_cast<int>(d.utterances.size()));
            const auto& ref = d.utterances[static_cast<std::size_t>(cs.j - 1)];
            CHECK(ref.speaker == cs.assistant_agent);
            if (std::string(component) == "belief") {
                const auto& prev = d.utterances[static_cast<std::size_t>(cs.j - 2)];
                CHECK(!prev.reveals.empty());
            }
            if (std::string(component) == "desire") {
                bool found = false;
                for (const auto& rv : ref.reveals)
                    if (rv.level == Level::High && item_name(rv.item) == cs.target_label)
                        found = true;
                CHECK(found);
            }
        }
    }

    Dialogue bare;
    bare.id = "bare";
    for (int t = 0; t < 6; ++t) {
        Utterance u;
        u.speaker = t % 2 == 0 ? 1 : 2;
        u.text = "okay , that works for me .";
        u.ms1.agent = 1;
        u.ms2.agent = 2;
        bare.utterances.push_back(u);
    }
    CHECK(select_control_samples({bare}, "belief").empty());
}

TEST_CASE("vocabulary is closed over generator and template output") {
    const auto& v = shared_vocab();
    CHECK(v.size() < 600);
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 12, seed);
        CHECK_NOTHROW(render_dialogue_tokens(v, d, false));
        CHECK_NOTHROW(render_dialogue_tokens(v, d, true));
        auto qa = make_qa_pair(d, QaTemplate::NegotiationTom);
        CHECK_NOTHROW(v.tokenize(qa.question));
        CHECK_NOTHROW(v.tokenize(qa.answer));
        auto cq = make_qa_pair(d, QaTemplate::Casino);
        CHECK_NOTHROW(v.tokenize(cq.answer));
        auto bd = render_bargain_dialogue(generate_scenario(seed), seed);
        CHECK_NOTHROW(render_dialogue_tokens(v, bd, false));
        auto pq = make_qa_pair(bd, QaTemplate::Craigslist);
        CHECK_NOTHROW(v.tokenize(pq.question));
        CHECK_NOTHROW(v.tokenize(pq.answer));
    }
    CHECK_THROWS_AS(v.id("zebra"), SchemaError);
}

TEST_CASE("dialogue token rendering marks roles and utterance ends") {
    const auto& v = shared_vocab();
    auto d = render_dialogue(generate_scenario(3), 10, 3);
    auto toks = render_dialogue_tokens(v, d, false);
    CHECK(toks.front() == v.user);
    int eou_count = 0;
    for (int t : toks) eou_count += t == v.eou ? 1 : 0;
    CHECK(eou_count == 10);
    auto swapped = render_dialogue_tokens(v, d, true);
    CHECK(swapped.front() == v.assistant);
    auto hist = render_dialogue_tokens(v, d, false, 3);
    int eou_hist = 0;
    for (int t : hist) eou_hist += t == v.eou ? 1 : 0;
    CHECK(eou_hist == 3);
}

TEST_CASE("emission and ingestion round-trip") {
    std::vector<Dialogue> ds;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        auto d = render_dialogue(generate_scenario(seed), 10 + 2 * (seed % 2), seed);
        d.id = "syn-" + std::to_string(seed);
        ds.push_back(d);
    }
    const auto ntm = temp_path("corpus.ntm.jsonl");
    const auto markers = temp_path("corpus.markers.jsonl");
    write_negotiationtom_file(ntm, ds);
    write_markers_file(markers, ds);

    auto loaded = load_synthetic_corpus(ntm, markers);
    REQUIRE(loaded.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(loaded[i].id == ds[i].id);
        CHECK(loaded[i].scenario.desire1 == ds[i].scenario.desire1);
        CHECK(loaded[i].scenario.desire2 == ds[i].scenario.desire2);
        REQUIRE(loaded[i].utterances.size() == ds[i].utterances.size());
        for (std::size_t u = 0; u < ds[i].utterances.size(); ++u) {
            CHECK(loaded[i].utterances[u].text == ds[i].utterances[u].text);
            CHECK(loaded[i].utterances[u].ms1.belief == ds[i].utterances[u].ms1.belief);
            CHECK(loaded[i].utterances[u].ms2.desire == ds[i].utterances[u].ms2.desire);
            CHECK(same_intents(loaded[i].utterances[u].intents, ds[i].utterances[u].intents));
            CHECK(loaded[i].utterances[u].reveals.size() == ds[i].utterances[u].reveals.size());
        }
    }

    std::vector<Dialogue> bs;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        auto d = render_bargain_dialogue(generate_scenario(seed), seed);
        d.id = "bar-" + std::to_string(seed);
        bs.push_back(d);
    }
    const auto cl = temp_path("corpus.cl.jsonl");
    write_craigslist_file(cl, bs);
    auto loaded_b = ingest_dataset(DatasetKind::Craigslist, cl);
    REQUIRE(loaded_b.size() == bs.size());
    CHECK(loaded_b[0].scenario.bargain->seller_price == bs[0].scenario.bargain->seller_price);
    CHECK(loaded_b[0].scenario.bargain->buyer_price == bs[0].scenario.bargain->buyer_price);
}

TEST_CASE("casino ingestion maps priorities") {
    const auto path = temp_path("casino.jsonl");
    {
        std::ofstream out(path);
        out << R"({"dialogue": [["agent_1", "hello !"], ["agent_2", "hi !"]], )"
            << R"("agent1_priorities": {"food": "High", "water": "Low", "firewood": "Medium"}, )"
            << R"("agent2_priorities": {"food": "Low", "water": "High", "firewood": "Medium"}})"
            << "\n";
    }
    auto ds = ingest_dataset(DatasetKind::Casino, path);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].scenario.desire1[0] == Level::High);
    CHECK(ds[0].scenario.desire1[1] == Level::Low);
    CHECK(ds[0].scenario.desire1[2] == Level::Medium);
    CHECK(ds[0].utterances.size() == 2);
}

TEST_CASE("ingestion schema errors name the record") {
    const auto path = temp_path("bad.jsonl");
    {
        std::ofstream out(path);
        out << R"({"dialogue": [["agent_1", "x"]], "agent1_priorities": {"food": "High", )"
            << R"("water": "Low", "firewood": "Medium"}})" << "\n";
    }
    CHECK_THROWS_WITH_AS(ingest_dataset(DatasetKind::Casino, path), doctest::Contains("record 0"),
                         SchemaError);
    {
        std::ofstream out(path);
        out << R"({"category": "couch", "dialogue": [], "seller_price": 10, "buyer_price": 5, )"
            << R"("extra_field": 1})" << "\n";
    }
    CHECK_THROWS_WITH_AS(ingest_dataset(DatasetKind::Craigslist, path),
                         doctest::Contains("unknown field"), SchemaError);

    const auto empty = temp_path("empty.jsonl");
    std::ofstream(empty).close();
    CHECK(ingest_dataset(DatasetKind::Casino, empty).empty());
}

TEST_CASE("fantom ingestion accepts the documented schema") {
    const auto path = temp_path("fantom.jsonl");
    {
        std::ofstream out(path);
        out << R"({"conversation": ["sally: hello", "anne: hi"], "questions": [)"
            << R"({"set_id": "s0", "type": "belief-choice", "question": "q", "answer": "a", )"
            << R"("options": ["a", "b"]}]})" << "\n";
    }
    auto ds = ingest_dataset(DatasetKind::Fantom, path);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].utterances.size() == 2);
    CHECK(ds[0].source == "fantom");
}
