#pragma once

#include "seqcoref/model.hpp"
#include "seqcoref/symbols.hpp"
#include "seqcoref/scheme.hpp"
#include "seqcoref/diagnostics.hpp"
#include "seqcoref/linearizer.hpp"
#include "seqcoref/aligner.hpp"
#include "seqcoref/decoder.hpp"
#include "seqcoref/matching.hpp"
#include "seqcoref/metrics.hpp"
#include "seqcoref/corpus.hpp"
