#include "flexwalk/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flexwalk/errors.hpp"

namespace flexwalk
{
namespace
{
const char* kVersionLine = "# flexwalk-trace-v1";

const char* kColumns =
    "t,"
    "com_x,comv_x,coma_x,com_y,comv_y,coma_y,"
    "est_x,estv_x,esta_x,est_y,estv_y,esta_y,"
    "ref_x,refv_x,refa_x,ref_y,refv_y,refa_y,"
    "cop_x,cop_y,copref_x,copref_y,vrp_x,vrp_y,bias_x,bias_y,"
    "thL_x,thL_y,thR_x,thR_y,thLest_x,thLest_y,thRest_x,thRest_y,"
    "jerk_x,jerk_y,phase,sup_lo_x,sup_hi_x,sup_lo_y,sup_hi_y,fall";

const char* kUnits =
    "s,"
    "m,m/s,m/s2,m,m/s,m/s2,"
    "m,m/s,m/s2,m,m/s,m/s2,"
    "m,m/s,m/s2,m,m/s,m/s2,"
    "m,m,m,m,m,m,m,m,"
    "rad,rad,rad,rad,rad,rad,rad,rad,"
    "m/s3,m/s3,enum,m,m,m,m,bool";

void append_number(std::string& line, double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    line += buf;
    line += ',';
}
}  // namespace

void write_trace_csv(const SimTrace& trace, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw Error("write_trace_csv: cannot open " + path);
    }
    out << kVersionLine << "\n" << kColumns << "\n" << kUnits << "\n";
    std::string line;
    for (const auto& r : trace.rows)
    {
        line.clear();
        append_number(line, r.t);
        for (const auto* block : {&r.com_true, &r.com_est, &r.com_ref})
        {
            for (int axis = 0; axis < 2; axis++)
            {
                append_number(line, (*block)[axis].pos);
                append_number(line, (*block)[axis].vel);
                append_number(line, (*block)[axis].acc);
            }
        }
        for (const auto* v2 : {&r.cop_true, &r.cop_ref, &r.vrp_true, &r.bias,
                               &r.theta_left_true, &r.theta_right_true, &r.theta_left_est,
                               &r.theta_right_est, &r.jerk_cmd})
        {
            append_number(line, (*v2)(0));
            append_number(line, (*v2)(1));
        }
        line += std::to_string(static_cast<int>(r.phase));
        line += ',';
        append_number(line, r.support_lo(0));
        append_number(line, r.support_hi(0));
        append_number(line, r.support_lo(1));
        append_number(line, r.support_hi(1));
        line += r.fall ? '1' : '0';
        out << line << "\n";
    }
}

SimTrace read_trace_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error("read_trace_csv: cannot open " + path);
    }
    std::string line;
    std::getline(in, line);
    if (line != kVersionLine)
    {
        throw Error("read_trace_csv: unrecognized version line in " + path);
    }
    std::getline(in, line);  // column names
    std::getline(in, line);  // units
    SimTrace trace;
    while (std::getline(in, line))
    {
        if (line.empty())
        {
            continue;
        }
        std::vector<double> v;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
        {
            v.push_back(std::stod(cell));
        }
        if (v.size() != 43)
        {
            throw Error("read_trace_csv: malformed row in " + path);
        }
        TraceRow r;
        size_t i = 0;
        r.t = v[i++];
        for (auto* block : {&r.com_true, &r.com_est, &r.com_ref})
        {
            for (int axis = 0; axis < 2; axis++)
            {
                (*block)[axis].pos = v[i++];
                (*block)[axis].vel = v[i++];
                (*block)[axis].acc = v[i++];
            }
        }
        for (auto* v2 : {&r.cop_true, &r.cop_ref, &r.vrp_true, &r.bias, &r.theta_left_true,
                         &r.theta_right_true, &r.theta_left_est, &r.theta_right_est,
                         &r.jerk_cmd})
        {
            (*v2)(0) = v[i++];
            (*v2)(1) = v[i++];
        }
        r.phase = static_cast<PhaseTag>(static_cast<int>(v[i++]));
        r.support_lo(0) = v[i++];
        r.support_hi(0) = v[i++];
        r.support_lo(1) = v[i++];
        r.support_hi(1) = v[i++];
        r.fall = v[i++] != 0.0;
        trace.rows.push_back(r);
    }
    if (trace.rows.size() > 1)
    {
        trace.dt = trace.rows[1].t - trace.rows[0].t;
    }
    return trace;
}

std::vector<std::pair<double, double>> error_duration_profile(
    const std::vector<double>& abs_errors)
{
    std::vector<double> sorted = abs_errors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, double>> curve;
    curve.reserve(sorted.size());
    const double n = static_cast<double>(sorted.size());
    for (size_t i = 0; i < sorted.size(); i++)
    {
        curve.emplace_back((i + 1) / n, sorted[i]);
    }
    return curve;
}

std::vector<std::pair<double, double>> error_duration_profile(const SimTrace& trace)
{
    std::vector<double> errors;
    errors.reserve(trace.rows.size());
    for (size_t i = 0; i < trace.rows.size(); i++)
    {
        errors.push_back(trace.cop_error(i).norm());
    }
    return error_duration_profile(errors);
}

void write_profile_csv(const std::vector<std::pair<double, double>>& profile,
                       const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw Error("write_profile_csv: cannot open " + path);
    }
    out << "# flexwalk-profile-v1\n";
    out << "time_fraction,error_bound\n";
    out << ",m\n";
    char buf[80];
    for (const auto& [fraction, bound] : profile)
    {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g\n", fraction, bound);
        out << buf;
    }
}

}  // namespace flexwalk
