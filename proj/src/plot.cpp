#include "adoptfit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

namespace adoptfit {

namespace {

constexpr double kPanelW = 320.0;
constexpr double kPanelH = 240.0;
constexpr double kMargin = 40.0;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Axis
{
  double lo = 0.0;
  double hi = 1.0;

  static Axis covering(const std::vector<double>& v)
  {
    Axis a;
    if (v.empty())
      return a;
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    a.lo = *mn;
    a.hi = *mx;
    if (!(a.lo < a.hi)) {
      a.lo -= 0.5;
      a.hi += 0.5;
    }
    return a;
  }

  double frac(double v) const { return (v - lo) / (hi - lo); }
};

// One plotting panel at column `col` of a row of panels.
class Panel
{
public:
  Panel(std::ostringstream& os, int col, std::string title, Axis x, Axis y, std::string x_label,
        std::string y_label)
    : os_(os), x0_(kMargin + col * (kPanelW + kMargin)), y0_(kMargin), x_(x), y_(y)
  {
    os_ << "<g>\n";
    os_ << "<rect x=\"" << fmt(x0_) << "\" y=\"" << fmt(y0_) << "\" width=\"" << fmt(kPanelW) << "\" height=\""
        << fmt(kPanelH) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    os_ << "<text x=\"" << fmt(x0_ + kPanelW / 2) << "\" y=\"" << fmt(y0_ - 8)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(title) << "</text>\n";
    os_ << "<text x=\"" << fmt(x0_ + kPanelW / 2) << "\" y=\"" << fmt(y0_ + kPanelH + 28)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << escape(x_label) << "</text>\n";
    os_ << "<text x=\"" << fmt(x0_ - 28) << "\" y=\"" << fmt(y0_ + kPanelH / 2)
        << "\" text-anchor=\"middle\" font-size=\"10\" transform=\"rotate(-90 " << fmt(x0_ - 28) << ' '
        << fmt(y0_ + kPanelH / 2) << ")\">" << escape(y_label) << "</text>\n";
    tick_labels();
  }

  ~Panel() { os_ << "</g>\n"; }

  double px(double x) const { return x0_ + x_.frac(x) * kPanelW; }
  double py(double y) const { return y0_ + (1.0 - y_.frac(y)) * kPanelH; }

  void bar(double x_lo, double x_hi, double height, const char* color)
  {
    os_ << "<rect x=\"" << fmt(px(x_lo)) << "\" y=\"" << fmt(py(height)) << "\" width=\""
        << fmt(std::max(0.0, px(x_hi) - px(x_lo))) << "\" height=\"" << fmt(py(y_.lo) - py(height))
        << "\" fill=\"" << color << "\" stroke=\"#fff\" stroke-width=\"0.5\"/>\n";
  }

  void point(double x, double y, const char* color, const std::string& title)
  {
    os_ << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"2.5\" fill=\"" << color
        << "\" fill-opacity=\"0.7\"><title>" << escape(title) << "</title></circle>\n";
  }

  void line(const std::vector<double>& xs, const std::vector<double>& ys, const char* color)
  {
    os_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i)
      os_ << (i ? " " : "") << fmt(px(xs[i])) << ',' << fmt(py(ys[i]));
    os_ << "\"/>\n";
  }

  void legend(int row, const std::string& text, const char* color)
  {
    double y = y0_ + 12 + row * 12;
    os_ << "<rect x=\"" << fmt(x0_ + kPanelW - 110) << "\" y=\"" << fmt(y - 8) << "\" width=\"8\" height=\"8\" fill=\""
        << color << "\"/>\n";
    os_ << "<text x=\"" << fmt(x0_ + kPanelW - 98) << "\" y=\"" << fmt(y) << "\" font-size=\"9\">" << escape(text)
        << "</text>\n";
  }

private:
  void tick_labels()
  {
    os_ << "<text x=\"" << fmt(x0_) << "\" y=\"" << fmt(y0_ + kPanelH + 12) << "\" font-size=\"9\">" << label(x_.lo)
        << "</text>\n";
    os_ << "<text x=\"" << fmt(x0_ + kPanelW) << "\" y=\"" << fmt(y0_ + kPanelH + 12)
        << "\" text-anchor=\"end\" font-size=\"9\">" << label(x_.hi) << "</text>\n";
    os_ << "<text x=\"" << fmt(x0_ - 3) << "\" y=\"" << fmt(y0_ + kPanelH) << "\" text-anchor=\"end\" font-size=\"9\">"
        << label(y_.lo) << "</text>\n";
    os_ << "<text x=\"" << fmt(x0_ - 3) << "\" y=\"" << fmt(y0_ + 8) << "\" text-anchor=\"end\" font-size=\"9\">"
        << label(y_.hi) << "</text>\n";
  }

  std::ostringstream& os_;
  double x0_;
  double y0_;
  Axis x_;
  Axis y_;
};

void open_svg(std::ostringstream& os, int panels)
{
  double w = kMargin + panels * (kPanelW + kMargin);
  double h = kPanelH + 2.5 * kMargin;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
     << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
}

} // namespace

std::string histograms_svg(const ParameterHistograms& h)
{
  std::ostringstream os;
  open_svg(os, 3);
  int col = 0;
  for (const Histogram* hist : {&h.lambda, &h.mu, &h.sigma}) {
    double peak = 1.0;
    for (std::size_t c : hist->counts)
      peak = std::max(peak, static_cast<double>(c));
    Axis x{hist->edges.front(), hist->edges.back()};
    Axis y{0.0, peak};
    std::string scale = hist->scale == HistScale::log10 ? "log10 " : "";
    Panel panel(os, col, hist->parameter, x, y, scale + hist->parameter, "fits");
    for (std::size_t i = 0; i < hist->counts.size(); ++i)
      panel.bar(hist->edges[i], hist->edges[i + 1], static_cast<double>(hist->counts[i]), kPalette[col]);
    ++col;
  }
  os << "</svg>\n";
  return os.str();
}

std::string pairwise_svg(const PairwisePanels& panels)
{
  std::ostringstream os;
  open_svg(os, 3);
  struct Spec
  {
    const std::vector<PairPoint>* pts;
    const char* x_name;
    const char* y_name;
  };
  const Spec specs[] = {{&panels.lambda_mu, "lambda", "mu"},
                        {&panels.lambda_sigma, "lambda", "sigma"},
                        {&panels.sigma_mu, "sigma", "mu"}};
  int col = 0;
  for (const Spec& s : specs) {
    std::vector<double> xs, ys;
    for (const PairPoint& p : *s.pts) {
      xs.push_back(p.x);
      ys.push_back(p.y);
    }
    bool log_x = !xs.empty() && std::all_of(xs.begin(), xs.end(), [](double v) { return v > 0.0; });
    bool log_y = !ys.empty() && std::all_of(ys.begin(), ys.end(), [](double v) { return v > 0.0; });
    if (log_x)
      for (double& v : xs)
        v = std::log10(v);
    if (log_y)
      for (double& v : ys)
        v = std::log10(v);
    Panel panel(os, col, std::string(s.x_name) + " vs " + s.y_name, Axis::covering(xs), Axis::covering(ys),
                (log_x ? "log10 " : "") + std::string(s.x_name), (log_y ? "log10 " : "") + std::string(s.y_name));
    for (std::size_t i = 0; i < xs.size(); ++i)
      panel.point(xs[i], ys[i], kPalette[col], (*s.pts)[i].subject_id);
    ++col;
  }
  os << "</svg>\n";
  return os.str();
}

std::string org_density_svg(std::span<const OrgDensityReport> reports)
{
  std::ostringstream os;
  open_svg(os, std::max<int>(1, static_cast<int>(reports.size())));
  int col = 0;
  for (const OrgDensityReport& r : reports) {
    std::vector<double> xs, ys;
    for (const DensityCurve& c : r.curves) {
      xs.insert(xs.end(), c.grid.begin(), c.grid.end());
      ys.insert(ys.end(), c.density.begin(), c.density.end());
    }
    ys.push_back(0.0);
    Panel panel(os, col, std::to_string(r.horizon_buckets) + " buckets", Axis::covering(xs), Axis::covering(ys),
                "cumulative count", "density");
    int row = 0;
    for (const DensityCurve& c : r.curves) {
      const char* color = kPalette[row % 10];
      panel.line(c.grid, c.density, color);
      panel.legend(row, c.organization, color);
      ++row;
    }
    ++col;
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace adoptfit
