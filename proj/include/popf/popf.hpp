#pragma once

// Umbrella header for the period optimal power flow library.

#include "popf/admittance.hpp"
#include "popf/case_parser.hpp"
#include "popf/config.hpp"
#include "popf/core.hpp"
#include "popf/forecast.hpp"
#include "popf/frequency_response.hpp"
#include "popf/intervals.hpp"
#include "popf/network_case.hpp"
#include "popf/nlp.hpp"
#include "popf/period_opf.hpp"
#include "popf/power_flow.hpp"
#include "popf/report.hpp"
#include "popf/scenario.hpp"
#include "popf/schedule.hpp"
#include "popf/verify.hpp"
