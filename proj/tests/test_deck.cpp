#include <gtest/gtest.h>

#include "odefit/bench.hpp"
#include "odefit/deck.hpp"
#include "odefit/scaling.hpp"

using namespace odefit;

namespace {

const char* kMinimal = R"xml(<deck name="decay">
  <states><state name="y" initial="1"/></states>
  <parameters><parameter name="k" lower="0.1" upper="10"/></parameters>
  <rhs><equation state="y">-k*y</equation></rhs>
  <dataset path="decay.csv"><column name="y" signal="y"/></dataset>
</deck>)xml";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto p = s.find(from);
  EXPECT_NE(p, std::string::npos) << from;
  if (p != std::string::npos) s.replace(p, from.size(), to);
  return s;
}

}  // namespace

TEST(Parse, RobertsonDeck) {
  const auto d = get_benchmark("robertson").deck();
  ASSERT_EQ(d.states.size(), 3u);
  ASSERT_EQ(d.parameters.size(), 3u);
  EXPECT_EQ(d.parameters[0].name, "k1");
  EXPECT_DOUBLE_EQ(d.parameters[1].lower, 1e5);
  EXPECT_DOUBLE_EQ(d.parameters[1].upper, 1e9);
  EXPECT_TRUE(d.mass_conserving);
  EXPECT_EQ(d.rhs.size(), 3u);
  EXPECT_EQ(d.states[0].observed, "y1");
}

TEST(Parse, AutoScaleResolution) {
  // Drop the explicit scale from k1 and k2; both ranges exceed a ratio of 100.
  const auto deck = parse_deck(replace(replace(get_benchmark("robertson").deck_xml, " scale=\"log10\"", ""),
                                       " scale=\"log10\"", ""));
  EXPECT_EQ(deck.parameters[0].scale, ParamScale::automatic);
  EXPECT_EQ(deck.parameters[1].scale, ParamScale::automatic);
  EXPECT_EQ(deck.parameters[2].scale, ParamScale::log10);
  EXPECT_EQ(resolved_scale(deck.parameters[0]), ParamScale::log10);
  EXPECT_EQ(resolved_scale(deck.parameters[1]), ParamScale::log10);
  EXPECT_EQ(resolved_scale(ParamDecl{"a", 1.0, 100.0, ParamScale::automatic}), ParamScale::linear);
  EXPECT_EQ(resolved_scale(ParamDecl{"a", 1.0, 100.01, ParamScale::automatic}), ParamScale::log10);
  EXPECT_EQ(resolved_scale(ParamDecl{"a", 0.0, 1e6, ParamScale::automatic}), ParamScale::linear);
}

TEST(Parse, DefaultsApplied) {
  const auto d = parse_deck(kMinimal);
  EXPECT_EQ(d.dataset.time_column, "t");
  EXPECT_EQ(d.dataset.rate_source, RateSource::finite_difference);
  EXPECT_EQ(d.solver.method, Method::tr_bdf2);
  EXPECT_EQ(d.optimizer.pso.swarm_size, 64u);
  EXPECT_EQ(d.optimizer.pso.iterations, 300u);
  EXPECT_EQ(d.optimizer.lbfgs.memory, 10u);
  EXPECT_EQ(d.outputs, all_output_kinds());
  EXPECT_TRUE(d.loss.empty());
}

TEST(Parse, ZeroParametersIsAnError) {
  try {
    parse_deck(replace(kMinimal, R"(<parameters><parameter name="k" lower="0.1" upper="10"/></parameters>)",
                       "<parameters/>"));
    FAIL();
  } catch (const DeckParseError& e) {
    EXPECT_NE(std::string(e.what()).find("missing mandatory block: parameters"), std::string::npos);
  }
}

TEST(Parse, MissingMandatoryBlocks) {
  for (const std::string block : {"states", "rhs", "dataset"}) {
    std::string xml = kMinimal;
    const auto b = xml.find("<" + block);
    const auto close = "</" + block + ">";
    auto e = xml.find(close, b);
    if (e == std::string::npos) e = xml.find("/>", b), e += 2;
    else e += close.size();
    xml.erase(b, e - b);
    try {
      parse_deck(xml);
      FAIL() << block;
    } catch (const DeckParseError& err) {
      EXPECT_NE(std::string(err.what()).find("missing mandatory block: " + block), std::string::npos) << err.what();
    }
  }
}

TEST(Parse, ReservedAndDuplicateNames) {
  for (const auto* bad : {R"(<parameter name="t" lower="0.1" upper="10"/>)", R"(<parameter name="y" lower="0.1" upper="10"/>)",
                          R"(<parameter name="pi" lower="0.1" upper="10"/>)"}) {
    try {
      parse_deck(replace(kMinimal, R"(<parameter name="k" lower="0.1" upper="10"/>)",
                         std::string(R"(<parameter name="k" lower="0.1" upper="10"/>)") + bad));
      FAIL() << bad;
    } catch (const DeckParseError& e) {
      EXPECT_NE(std::string(e.what()).find("duplicate/reserved name"), std::string::npos) << e.what();
    }
  }
}

TEST(Parse, XmlSyntaxErrorHasPosition) {
  try {
    parse_deck("<deck name=\"x\">\n  <states>\n    <state name=\"y\"\n</deck>");
    FAIL();
  } catch (const XmlSyntaxError& e) {
    EXPECT_GE(e.line(), 3u);
    EXPECT_GE(e.column(), 1u);
  }
  EXPECT_THROW(parse_deck("<deck><states></deck>"), XmlSyntaxError);
}

TEST(Parse, UnknownElementsWarnAndSurvive) {
  const auto d = parse_deck(replace(kMinimal, "</deck>", "<notes author=\"me\">hello</notes></deck>"));
  ASSERT_EQ(d.extra_elements.size(), 1u);
  EXPECT_FALSE(d.warnings.empty());
  const auto again = parse_deck(serialize_deck(d));
  EXPECT_EQ(again.extra_elements, d.extra_elements);
}

TEST(Serialize, RoundTripIsIdentity) {
  for (const auto& name : list_benchmarks()) {
    const auto d = get_benchmark(name).deck();
    const auto text = serialize_deck(d);
    const auto back = parse_deck(text);
    EXPECT_EQ(back, d) << name;
    EXPECT_EQ(serialize_deck(back), text) << name;
  }
}

TEST(Serialize, DefaultsMaterialized) {
  const auto text = serialize_deck(parse_deck(kMinimal));
  for (const auto* attr : {"rtol=\"1e-06\"", "swarm_size=\"64\"", "memory=\"10\"", "time_column=\"t\"", "safety=\"0.9\"",
                           "<outputs>params loss_history trajectory report</outputs>"})
    EXPECT_NE(text.find(attr), std::string::npos) << attr << "\n" << text;
}

TEST(Serialize, DeclarationOrderIsKept) {
  const auto d = parse_deck(replace(kMinimal, R"(<parameter name="k" lower="0.1" upper="10"/>)",
                                    R"(<parameter name="z" lower="1" upper="2"/><parameter name="k" lower="0.1" upper="10"/>)"));
  const auto text = serialize_deck(d);
  EXPECT_LT(text.find("name=\"z\""), text.find("name=\"k\""));
  EXPECT_EQ(parse_deck(text), d);
}

TEST(Skeleton, EmptyRhsGetsOneSlotPerState) {
  const auto vdp = get_benchmark("vanderpol").deck_xml;
  auto xml = replace(vdp, "<equation state=\"x1\">mu*(x2 - (x1^3/3 - x1))</equation>", "<equation state=\"x1\"/>");
  xml = replace(xml, "<equation state=\"x2\">-x1/mu</equation>", "");
  const auto sk = generate_skeleton(parse_deck(xml));
  EXPECT_NE(sk.find("<!-- FILL: rhs of x1 -->"), std::string::npos);
  EXPECT_NE(sk.find("<!-- FILL: rhs of x2 -->"), std::string::npos);
  EXPECT_EQ(count_fill_slots(sk), 2u);
}

TEST(Skeleton, FilledDeckIsEchoedAndIdempotent) {
  const auto d = get_benchmark("robertson").deck();
  const auto sk = generate_skeleton(d);
  EXPECT_EQ(count_fill_slots(sk), 0u);
  EXPECT_NE(sk.find("-k1*y1 + k3*y2*y3"), std::string::npos);
  EXPECT_EQ(parse_deck(sk), d);
  EXPECT_EQ(generate_skeleton(parse_deck(sk)), sk);
}

TEST(Skeleton, InputSlotAndFilledRoundTrip) {
  auto xml = replace(get_benchmark("piezo_bouc_wen").deck_xml, "<input name=\"V\">24 + 24*sin(16*pi*t)</input>",
                     "<input name=\"V\"/>");
  const auto sk = generate_skeleton(parse_deck(xml));
  EXPECT_NE(sk.find("<!-- FILL: expression of input V in t -->"), std::string::npos);
  EXPECT_EQ(count_fill_slots(sk), 1u);
  const auto filled = replace(sk, "<!-- FILL: expression of input V in t -->", "24 + 24*sin(16*pi*t)");
  EXPECT_EQ(parse_deck(filled), get_benchmark("piezo_bouc_wen").deck());
}

TEST(Skeleton, MissingInitialAndLossSlots) {
  auto xml = replace(kMinimal, "<state name=\"y\" initial=\"1\"/>", "<state name=\"y\"/>");
  const auto sk = generate_skeleton(parse_deck(xml));
  EXPECT_NE(sk.find("<!-- FILL: initial condition of y -->"), std::string::npos);
  EXPECT_NE(sk.find("<!-- FILL: loss term for signal y -->"), std::string::npos);
  EXPECT_EQ(count_fill_slots(sk), 2u);
}

TEST(Csv, ParseAndFormat) {
  const auto t = parse_csv("t, y\n0, 1\n0.5, 2.5e-3\n");
  ASSERT_EQ(t.names.size(), 2u);
  EXPECT_EQ(t.names[1], "y");
  EXPECT_DOUBLE_EQ(t.columns[1][1], 2.5e-3);
  EXPECT_EQ(parse_csv(to_csv(t)).columns, t.columns);
}

TEST(Csv, ErrorsNameRowAndColumn) {
  try {
    parse_csv("t,y\n0,1\n1,abc\n");
    FAIL();
  } catch (const CsvError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("row 3"), std::string::npos) << m;
    EXPECT_NE(m.find("column 2"), std::string::npos) << m;
  }
  EXPECT_THROW(parse_csv("t,y\n0,1,2\n"), CsvError);
}

TEST(Csv, RoundTripIsExact) {
  DataTable t;
  t.names = {"t", "x"};
  t.columns = {{0.0, 0.1, 1.0 / 3.0}, {1e-300, -2.5e17, 6.02214076e23}};
  EXPECT_EQ(parse_csv(to_csv(t)).columns, t.columns);
}
