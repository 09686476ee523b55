#include <gtest/gtest.h>

#include "htl/plot.hpp"

TEST(Svg, OnePolylinePerSeriesAndEscapedText) {
    htl::PlotSpec spec;
    spec.title = "risk <&> n";
    const std::vector<htl::PlotSeries> series{{"a", {100, 200, 400}, {0.1, 0.05, 0.02}},
                                              {"b", {100, 200, 400}, {0.2, 0.1, 0.0}}};
    const std::string svg = htl::render_svg(spec, series);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("risk &lt;&amp;&gt; n"), std::string::npos);
    std::size_t count = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++count;
    EXPECT_EQ(count, 2u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, RejectsMismatchedSeries) {
    EXPECT_THROW(htl::render_svg({}, {{"bad", {1, 2}, {1}}}), htl::InputError);
}

TEST(Svg, EmptyInputStillRenders) {
    EXPECT_NE(htl::render_svg({}, {}).find("</svg>"), std::string::npos);
}
