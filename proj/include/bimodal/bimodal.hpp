#pragma once

// Bi-modality image synthesis: sequential GAN with semi-supervised training,
// complexity-driven order decision, and the IS/FID/joint-FID/MID evaluation
// harness.

#include "bimodal/checkpoint.hpp"
#include "bimodal/classifier.hpp"
#include "bimodal/config.hpp"
#include "bimodal/errors.hpp"
#include "bimodal/feature_space.hpp"
#include "bimodal/hashing.hpp"
#include "bimodal/image.hpp"
#include "bimodal/image_io.hpp"
#include "bimodal/layers.hpp"
#include "bimodal/losses.hpp"
#include "bimodal/metrics.hpp"
#include "bimodal/networks.hpp"
#include "bimodal/optimizer.hpp"
#include "bimodal/pipeline.hpp"
#include "bimodal/report.hpp"
#include "bimodal/rng.hpp"
#include "bimodal/tensor.hpp"
#include "bimodal/toy.hpp"
#include "bimodal/trainer.hpp"
