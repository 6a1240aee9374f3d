#pragma once

#include "analysis.hpp"
#include "backend.hpp"
#include "contrast.hpp"
#include "dataset.hpp"
#include "decoder.hpp"
#include "error.hpp"
#include "expression.hpp"
#include "harness.hpp"
#include "http.hpp"
#include "ngram.hpp"
#include "prompt.hpp"
#include "vocabulary.hpp"
