#pragma once

#include "backends.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "evaluation.hpp"
#include "fusion.hpp"
#include "label.hpp"
#include "pipeline.hpp"
#include "prompting.hpp"
#include "registry.hpp"
#include "report.hpp"
#include "scoring.hpp"
#include "simulate.hpp"
#include "stats.hpp"
