#include "fta/reference.hpp"

namespace fta {

IntMatrix matmul_ref(const IntMatrix& a, const IntMatrix& b, int frac_bits) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  IntMatrix out(a.rows, b.cols, 16);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      int64_t acc = 0;
      for (int k = 0; k < a.cols; ++k) {
        acc += static_cast<int64_t>(a.at(i, k)) * b.at(k, j);
      }
      out.at(i, j) = requantize(acc, frac_bits);
    }
  }
  return out;
}

IntMatrix sequential_ref(const IntMatrix& x, const IntMatrix& ws,
                         const SparseMatrixFixedNZ& wd, int frac_bits) {
  require(x.cols == ws.rows, "sequential: X cols != Ws rows");
  require(ws.cols == wd.rows, "sequential: Ws cols != Wd rows");
  return matmul_ref(matmul_ref(x, ws, frac_bits), densify(wd), frac_bits);
}

MacCounts mac_counts(uint64_t l, uint64_t d, uint64_t h, uint64_t d_out, uint64_t k) {
  MacCounts c;
  c.sequential = l * d * h + l * k * d_out;
  c.fused = l * d * d_out;
  c.original = l * d * d_out;
  return c;
}

IntMatrix reference_pipeline(const ModelSpec& model, const DecodedWeights& weights,
                             const IntMatrix& x, int frac_bits) {
  require(x.cols == model.model_width, "pipeline: input width != model width");
  require(x.rows >= 1 && x.rows <= model.max_seq_len,
          "pipeline: input length out of range");
  require(weights.wd.size() == model.sections().size(),
          "pipeline: section count mismatch");

  const afu::Lut exp_lut = afu::build_exp_lut();
  const afu::Lut gelu_lut = afu::build_gelu_lut(frac_bits);

  IntMatrix act = x;
  act.bitwidth = 16;
  size_t section = 0;
  for (const LayerSpec& layer : model.layers) {
    for (int16_t& v : act.data) v = clamp_to_bits(v, layer.activation_bits);
    IntMatrix anchor = act;
    for (const SubOp& op : layer.sub_ops) {
      switch (op.kind) {
        case SubOpKind::Matmul: {
          const IntMatrix& ws = weights.ws.at(op.dict_group);
          act = sequential_ref(act, ws, weights.wd[section], frac_bits);
          ++section;
          break;
        }
        case SubOpKind::Softmax:
          for (int r = 0; r < act.rows; ++r) {
            std::span<int16_t> row(&act.at(r, 0), static_cast<size_t>(act.cols));
            if (op.use_fau) {
              afu::softmax_row_fau(row, exp_lut, frac_bits);
            } else {
              afu::softmax_row(row, exp_lut, frac_bits);
            }
          }
          break;
        case SubOpKind::Layernorm:
          for (int r = 0; r < act.rows; ++r) {
            afu::layernorm_row({&act.at(r, 0), static_cast<size_t>(act.cols)}, frac_bits);
          }
          break;
        case SubOpKind::Gelu:
          for (int r = 0; r < act.rows; ++r) {
            afu::gelu_row({&act.at(r, 0), static_cast<size_t>(act.cols)}, gelu_lut,
                          frac_bits);
          }
          break;
        case SubOpKind::Residual:
          require(anchor.cols == act.cols, "residual: width mismatch");
          for (int r = 0; r < act.rows; ++r) {
            afu::residual_row({&act.at(r, 0), static_cast<size_t>(act.cols)},
                              {&anchor.at(r, 0), static_cast<size_t>(anchor.cols)});
          }
          anchor = act;
          break;
      }
    }
  }
  return act;
}

}  // namespace fta
