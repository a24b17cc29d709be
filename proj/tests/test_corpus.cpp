#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <unistd.h>

#include "mtseq/corpus.hpp"
#include "mtseq/errors.hpp"
#include "mtseq/feature_file.hpp"
#include "mtseq/synthetic.hpp"

using namespace mtseq;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("mtseq-corpus-test-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name, std::ios::binary) << text;
    return (path / name).string();
  }
};

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("vocabulary") {
  const auto v = Vocabulary::build({{"a", "b"}, {"b", "c"}});
  CHECK(v.size() == 7);
  CHECK(v.id("a") == 4);
  CHECK(v.id("c") == 6);
  CHECK(v.id("zzz") == kUnk);
  CHECK(v.symbol(kEos) == "</s>");
  CHECK(v.encode({"c", "q"}) == std::vector<int>{6, kUnk});
  CHECK(v.decode({4, 5, kUnk, kEos, kPad}) == std::vector<std::string>{"a", "b", "<unk>"});
  CHECK(v.symbols() == std::vector<std::string>{"a", "b", "c"});
  CHECK(Vocabulary::from_symbols(v.symbols()).encode({"a", "b", "c"}) == v.encode({"a", "b", "c"}));
  CHECK_THROWS_AS(v.symbol(7), ContractError);
}

TEST_CASE("parallel corpus loading") {
  TempDir d;
  d.write("t.src", "a b c\nb b\r\n");
  d.write("t.y1", "x y\ny\n");
  d.write("t.y2", "p\nq q\n");
  d.write("t.ids", "u1\nu2\n");

  SUBCASE("prefix discovery and contents") {
    const auto paths = corpus::paths_for_prefix((d.path / "t").string());
    CHECK_FALSE(paths.target2.empty());
    CHECK_FALSE(paths.ids.empty());
    const auto c = corpus::load_parallel(paths, models::SourceKind::text, "train");
    REQUIRE(c.size() == 2);
    CHECK(c.has_target2);
    CHECK(c.utterances[0].id == "u1");
    CHECK(c.utterances[1].source == std::vector<std::string>{"b", "b"});
    CHECK(c.utterances[1].target2 == std::vector<std::string>{"q", "q"});

    const auto v = corpus::build_vocabs(c, false);
    CHECK(v.source.size() == 7);
    CHECK(v.target1.size() == 6);
    const auto triples = corpus::encode(c, v, false);
    CHECK(triples[0].x.tokens == std::vector<int>{4, 5, 6});
    CHECK(triples[0].y1 == std::vector<int>{4, 5, kEos});
    CHECK(triples[1].y2 == std::vector<int>{5, 5, kEos});

    const auto rv = corpus::build_vocabs(c, true);
    CHECK(rv.target2.symbols() == rv.source.symbols());
    CHECK(corpus::encode(c, rv, true)[1].y2 == std::vector<int>{5, 5, kEos});
  }
  SUBCASE("optional sides") {
    fs::remove(d.path / "t.y2");
    fs::remove(d.path / "t.ids");
    const auto paths = corpus::paths_for_prefix((d.path / "t").string());
    CHECK(paths.target2.empty());
    const auto c = corpus::load_parallel(paths, models::SourceKind::text, "dev");
    CHECK_FALSE(c.has_target2);
    CHECK(c.utterances[1].id == "dev-2");
  }
  SUBCASE("line-count mismatch names both files") {
    d.write("t.y1", "x y\n");
    const auto msg = message_of([&] { corpus::load_parallel(corpus::paths_for_prefix((d.path / "t").string()), models::SourceKind::text); });
    CHECK(msg.find("t.src has 2") != std::string::npos);
    CHECK(msg.find("t.y1 has 1") != std::string::npos);
  }
  SUBCASE("duplicate ids and empty lines") {
    d.write("t.ids", "u1\nu1\n");
    CHECK_THROWS_AS(corpus::load_parallel(corpus::paths_for_prefix((d.path / "t").string()), models::SourceKind::text),
                    FormatError);
    d.write("t.ids", "u1\nu2\n");
    d.write("t.src", "a\n\n");
    CHECK_THROWS_AS(corpus::load_parallel(corpus::paths_for_prefix((d.path / "t").string()), models::SourceKind::text),
                    FormatError);
  }
  CHECK_THROWS_AS(corpus::read_lines((d.path / "missing").string()), FormatError);
  CHECK_THROWS_AS(corpus::build_vocabs(corpus::Corpus{}, false), ContractError);
}

TEST_CASE("feature files") {
  TempDir d;
  const std::string p = (d.path / "f.feat").string();
  const Tensor frames = Tensor::matrix(3, 2, {0.5, -1.25, 3, 4, 1e-3, -7});
  corpus::write_feature_file(p, frames);
  CHECK(fs::file_size(p) == corpus::kFeatureHeaderBytes + 6 * 4);
  const Tensor back = corpus::read_feature_file(p);
  REQUIRE(back.shape() == frames.shape());
  for (std::size_t i = 0; i < 6; ++i) CHECK(back[i] == static_cast<double>(static_cast<float>(frames[i])));

  auto bytes = [&] {
    std::ifstream is(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  };
  const std::string good = bytes();
  auto expect = [&](std::string data, const char* offset) {
    d.write("bad.feat", data);
    const auto msg = message_of([&] { corpus::read_feature_file((d.path / "bad.feat").string()); });
    CAPTURE(msg);
    CHECK(msg.find(offset) != std::string::npos);
    CHECK_THROWS_AS(corpus::read_feature_file((d.path / "bad.feat").string()), FormatError);
  };
  expect(good.substr(0, 10), "byte offset 10");
  expect("XXXX" + good.substr(4), "byte offset 0");
  {
    auto s = good;
    s[4] = 9;
    expect(s, "byte offset 4");
  }
  {
    auto s = good;
    s[16] = 2;
    expect(s, "byte offset 16");
  }
  expect(good.substr(0, good.size() - 3), "byte offset 20");

  SUBCASE("speech corpus resolves paths relative to the list") {
    d.write("s.src", "f.feat\n");
    d.write("s.y1", "a b\n");
    const auto c = corpus::load_parallel(corpus::paths_for_prefix((d.path / "s").string()), models::SourceKind::speech);
    CHECK(c.utterances[0].feature_path == p);
    const auto t = corpus::encode(c, corpus::build_vocabs(c, false), false);
    CHECK(t[0].x.is_speech());
    CHECK(t[0].x.features.rows() == 3);
  }
}

TEST_CASE("fold manifests") {
  TempDir d;
  const auto p = d.write("folds.txt", "# name train dev test\nf1 a/train a/dev /abs/test\n\nf2 b c d  # trailing\n");
  const auto folds = corpus::read_fold_manifest(p);
  REQUIRE(folds.size() == 2);
  CHECK(folds[0].name == "f1");
  CHECK(folds[0].train == (d.path / "a/train").string());
  CHECK(folds[0].test == "/abs/test");
  CHECK(folds[1].dev == (d.path / "c").string());
  CHECK_THROWS_AS(corpus::read_fold_manifest(d.write("bad.txt", "f1 a b\n")), FormatError);
  CHECK_THROWS_AS(corpus::read_fold_manifest(d.write("empty.txt", "# nothing\n")), FormatError);
}

TEST_CASE("synthetic task") {
  synthetic::Config cfg;
  cfg.train = 200;
  const auto data = synthetic::generate(cfg);
  CHECK(data.train.size() == 200);
  CHECK(data.lexicon.size() == 12);
  std::map<std::string, std::string> pi, sigma;
  for (const auto& u : data.train) {
    CHECK(u.chars.size() <= 12);
    CHECK(u.y1.size() == u.chars.size());
    CHECK(u.y2.size() == u.chars.size());
    CHECK_NOTHROW(u.segmentation().validate());
    const auto words = u.segmentation().words();
    REQUIRE(words.size() == u.words.size());
    for (std::size_t k = 0; k < words.size(); ++k)
      CHECK(data.lexicon.at(std::stoul(u.words[k].substr(1))) == words[k]);
    for (std::size_t i = 0; i < u.chars.size(); ++i) {
      // Both maps are functions of the character.
      CHECK(pi.emplace(u.chars[i], u.y1[i]).first->second == u.y1[i]);
      CHECK(sigma.emplace(u.y1[i], u.y2[i]).first->second == u.y2[i]);
    }
  }
  const auto again = synthetic::generate(cfg);
  CHECK(again.train[17].chars == data.train[17].chars);
  cfg.seed = 8;
  CHECK(synthetic::generate(cfg).lexicon != data.lexicon);
  cfg.alphabet = 1;
  CHECK_THROWS_AS(synthetic::generate(cfg), ConfigError);

  TempDir d;
  synthetic::write_dataset(data, d.path.string());
  for (const char* f : {"train.src", "train.y1", "train.y2", "dev.ids", "wd-test.gold", "wd-train.y1"})
    CHECK(fs::exists(d.path / f));
  const auto gold = corpus::read_lines((d.path / "wd-train.gold").string());
  CHECK(gold[0] == eval::format_segmentation(data.train[0].segmentation()));
}
