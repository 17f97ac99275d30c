#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "tsd/error.hpp"
#include "tsd/records.hpp"

using namespace tsd;
using namespace testutil;

namespace {

std::string record_line(const std::string & id, std::size_t n) {
    std::ostringstream os;
    os << R"({"id":")" << id << R"(","label":"ai","logprob":[)";
    for (std::size_t i = 0; i < n; ++i) {
        os << (i ? "," : "") << "-1.5";
    }
    os << R"(],"rank":[)";
    for (std::size_t i = 0; i < n; ++i) {
        os << (i ? "," : "") << (i % 7 + 1);
    }
    os << "]}";
    return os.str();
}

}  // namespace

TEST_CASE("parse_record accepts a minimal record") {
    const auto rec = parse_record(R"({"id":"a","label":"human","logprob":[-1.0,-2.0]})");
    CHECK(rec.id == "a");
    CHECK(rec.label == Label::human);
    CHECK(rec.size() == 2);
    CHECK(rec.logprob == std::vector<double>{-1.0, -2.0});
    CHECK_FALSE(rec.rank);
    CHECK_FALSE(rec.entropy);
    CHECK_FALSE(rec.token_prob);
    CHECK_FALSE(rec.topk_mass);
    CHECK_FALSE(rec.mu);
    CHECK_FALSE(rec.sigma2);
    CHECK_FALSE(rec.family);
}

TEST_CASE("parse_record rejects positive logprob") {
    const auto fn = [] { parse_record(R"({"id":"b","label":"ai","logprob":[0.5]})"); };
    CHECK(error_code_of(fn) == Errc::validation);
    CHECK(error_message_of(fn).find("logprob[0] > 0") != std::string::npos);
}

TEST_CASE("parse_record rejects length mismatch") {
    const auto fn = [] { parse_record(R"({"id":"c","label":"ai","logprob":[-1,-1],"rank":[1]})"); };
    CHECK(error_code_of(fn) == Errc::validation);
    CHECK(error_message_of(fn).find("length mismatch rank") != std::string::npos);
}

TEST_CASE("parse_record error classes") {
    SUBCASE("malformed syntax names the line") {
        const auto fn = [] { parse_record(R"({"id":"a",)", 7); };
        CHECK(error_code_of(fn) == Errc::parse);
        CHECK(error_message_of(fn).find("line 7") != std::string::npos);
    }
    SUBCASE("missing required fields") {
        CHECK(error_code_of([] { parse_record(R"({"label":"ai","logprob":[-1]})"); }) == Errc::schema);
        CHECK(error_code_of([] { parse_record(R"({"id":"x","logprob":[-1]})"); }) == Errc::schema);
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai"})"); }) == Errc::schema);
    }
    SUBCASE("bad label") {
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"bot","logprob":[-1]})"); }) == Errc::validation);
    }
    SUBCASE("token_prob must match exp(logprob)") {
        CHECK_NOTHROW(parse_record(R"({"id":"x","label":"ai","logprob":[0],"token_prob":[1.0]})"));
        CHECK(error_code_of([] {
                  parse_record(R"({"id":"x","label":"ai","logprob":[-1],"token_prob":[0.5]})");
              }) == Errc::validation);
    }
    SUBCASE("range checks") {
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai","logprob":[-1],"rank":[0]})"); }) ==
              Errc::validation);
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai","logprob":[-1],"sigma2":[-0.1]})"); }) ==
              Errc::validation);
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai","logprob":[-1],"topk_mass":[1.2]})"); }) ==
              Errc::validation);
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai","logprob":[-1],"entropy":[-1]})"); }) ==
              Errc::validation);
    }
    SUBCASE("empty logprob") {
        CHECK(error_code_of([] { parse_record(R"({"id":"x","label":"ai","logprob":[]})"); }) == Errc::validation);
    }
}

TEST_CASE("serialize/parse round-trip keeps unknown keys") {
    const std::string line =
        R"({"id":"r1","label":"ai","family":"GPT-4o","domain_tag":"news","tokens":["a","b"],)"
        R"("logprob":[-0.1,-2.25],"rank":[1,4],"entropy":[0.5,1.5],"token_prob":[0.9048374180359595,0.10539922456186433],)"
        R"("topk_mass":[0.99,0.8],"mu":[-0.3,-1.1],"sigma2":[0.2,0.7],"source":{"split":"test"},"note":"x"})";
    const auto rec = parse_record(line);
    CHECK(rec.extra.size() == 2);
    const auto again = parse_record(serialize_record(rec));
    CHECK(again == rec);
    CHECK(serialize_record(again) == serialize_record(rec));
}

TEST_CASE("round-trip property over random records") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lp(-12.0, 0.0);
    std::uniform_int_distribution<int> len(1, 40);
    for (int trial = 0; trial < 200; ++trial) {
        ScoreRecord rec;
        rec.id = "t" + std::to_string(trial);
        rec.label = trial % 2 ? Label::ai : Label::human;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) {
            rec.logprob.push_back(lp(rng));
        }
        if (trial % 3 == 0) {
            rec.rank = std::vector<std::int64_t>(n, 3);
            rec.mu = rec.logprob;
            rec.sigma2 = std::vector<double>(n, 0.125);
        }
        if (trial % 5 == 0) {
            rec.family = "fam";
        }
        const auto parsed = parse_record(serialize_record(rec));
        REQUIRE(parsed == rec);
    }
}

TEST_CASE("read_corpus truncates, keeps order, and rejects duplicates") {
    SUBCASE("lengths 600 and 100 with cap 512") {
        std::stringstream in(record_line("long", 600) + "\n" + record_line("short", 100) + "\n");
        const auto corpus = read_corpus(in, 512);
        REQUIRE(corpus.records.size() == 2);
        CHECK(corpus.records[0].id == "long");
        CHECK(corpus.records[0].size() == 512);
        CHECK(corpus.records[0].rank->size() == 512);
        CHECK(corpus.records[1].size() == 100);
    }
    SUBCASE("empty input") {
        std::stringstream in("");
        const auto corpus = read_corpus(in, 512);
        CHECK(corpus.records.empty());
        CHECK(corpus.stubs.empty());
    }
    SUBCASE("duplicate id") {
        std::stringstream in(record_line("x", 3) + "\n" + record_line("x", 4) + "\n");
        CHECK(error_code_of([&] { read_corpus(in, 512); }) == Errc::duplicate_id);
    }
    SUBCASE("parse error carries the line number") {
        std::stringstream in(record_line("x", 3) + "\n\n" + R"({"id":"y","label":"ai","logprob":[1]})" + "\n");
        const auto msg = error_message_of([&] { read_corpus(in, 512); });
        CHECK(msg.find("line 3") != std::string::npos);
    }
    SUBCASE("error stubs are kept apart from records") {
        std::stringstream in(record_line("x", 3) + "\n" + R"({"id":"y","label":"ai","error":"transport: down"})" + "\n");
        const auto corpus = read_corpus(in, 512);
        CHECK(corpus.records.size() == 1);
        REQUIRE(corpus.stubs.size() == 1);
        CHECK(corpus.stubs[0].id == "y");
        CHECK(corpus.stubs[0].error == "transport: down");
    }
    SUBCASE("truncation is idempotent") {
        std::stringstream in(record_line("a", 50) + "\n" + record_line("b", 9) + "\n");
        const auto once = read_corpus(in, 20);
        CHECK(truncate_corpus(once, 20) == once);
    }
}

TEST_CASE("load_corpus reports unreadable files") {
    CHECK(error_code_of([] { load_corpus("/nonexistent/dir/file.jsonl", 512); }) == Errc::io);

    const auto path = std::filesystem::temp_directory_path() / "tsd_test_records.jsonl";
    {
        std::ofstream out(path);
        out << record_line("one", 5) << "\n";
    }
    const auto corpus = load_corpus(path, 3);
    CHECK(corpus.records.at(0).size() == 3);
    CHECK(corpus.max_tokens == 3);
    std::filesystem::remove(path);
}
