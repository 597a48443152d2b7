#pragma once

#include "qsvm/dataset.hpp"
#include "qsvm/error.hpp"
#include "qsvm/experiment.hpp"
#include "qsvm/qga.hpp"
#include "qsvm/skeleton.hpp"
#include "qsvm/svm.hpp"
#include "qsvm/synth.hpp"
#include "qsvm/tuning.hpp"
