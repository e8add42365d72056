#pragma once

#include "metric_grouper/ablation.hpp"
#include "metric_grouper/checkpoint.hpp"
#include "metric_grouper/clustering.hpp"
#include "metric_grouper/composition.hpp"
#include "metric_grouper/config.hpp"
#include "metric_grouper/corpus.hpp"
#include "metric_grouper/errors.hpp"
#include "metric_grouper/evaluation.hpp"
#include "metric_grouper/hashing.hpp"
#include "metric_grouper/kmeans.hpp"
#include "metric_grouper/lexicon.hpp"
#include "metric_grouper/metric_net.hpp"
#include "metric_grouper/pairgen.hpp"
#include "metric_grouper/parallel.hpp"
#include "metric_grouper/random.hpp"
#include "metric_grouper/text.hpp"
#include "metric_grouper/trainer.hpp"
#include "metric_grouper/word_vectors.hpp"
#include "metric_grouper/pipeline.hpp"
