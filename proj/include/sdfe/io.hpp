#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdfe/sim.hpp"

namespace sdfe::io {

// Shortest round-trip-exact decimal text for a double; deterministic across
// runs and thread counts.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, x);
    std::sscanf(shorter, "%lf", &back);
    if (back == x) return shorter;
  }
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  return out;
}

inline void write_report_csv(const std::vector<sim::ReportRow>& rows, const std::string& path) {
  auto out = open_out(path);
  out << "round,k,recall,ndcg,mean_loss,uplink,downlink,d2d\n";
  for (const auto& r : rows)
    out << r.round << ',' << r.k << ',' << fmt(r.recall) << ',' << fmt(r.ndcg) << ','
        << fmt(r.mean_loss) << ',' << r.comm.uplink << ',' << r.comm.downlink << ','
        << r.comm.d2d << '\n';
}

inline void write_report_jsonl(const std::vector<sim::ReportRow>& rows, const std::string& path) {
  auto out = open_out(path);
  for (const auto& r : rows) {
    out << "{\"round\":" << r.round << ",\"k\":" << r.k << ",\"recall\":" << fmt(r.recall)
        << ",\"ndcg\":" << fmt(r.ndcg) << ",\"mean_loss\":";
    if (std::isnan(r.mean_loss))
      out << "null";
    else
      out << fmt(r.mean_loss);
    out << ",\"uplink\":" << r.comm.uplink << ",\"downlink\":" << r.comm.downlink
        << ",\"d2d\":" << r.comm.d2d << "}\n";
  }
}

inline void write_ledger_csv(const std::vector<sim::CommRow>& ledger, const std::string& path) {
  auto out = open_out(path);
  out << "round,uplink,downlink,d2d\n";
  for (std::size_t r = 0; r < ledger.size(); ++r)
    out << r << ',' << ledger[r].uplink << ',' << ledger[r].downlink << ',' << ledger[r].d2d
        << '\n';
}

inline void write_transcript_jsonl(const std::vector<sim::RoundMessage>& transcript,
                                   const std::string& path) {
  auto out = open_out(path);
  for (const auto& m : transcript) {
    out << "{\"round\":" << m.round << ",\"kind\":\"" << sim::kind_name(m.kind) << "\",\"src\":\""
        << m.src << "\",\"dst\":\"" << m.dst << "\",\"layer\":" << m.layer
        << ",\"payload_params\":" << m.payload_params << "}\n";
  }
}

}  // namespace sdfe::io
