//! Gnuplot script generation for run traces.

use crate::trace::RunRecord;

/// Script plotting the KKT residual over time (log scale) and the
/// arctangent-compressed second-order stationarity measure. When the trace
/// carries no wall-clock data (unbudgeted runs record zeros) the row index
/// is used as the abscissa instead.
pub fn gnuplot_script(csv_path: &str, records: &[RunRecord]) -> String {
    let timed = records.iter().any(|r| r.elapsed_s > 0.0);
    let (x_expr, x_label) = if timed {
        ("(column(3))", "elapsed seconds")
    } else {
        ("($0)", "row index")
    };
    format!(
        "# gnuplot script generated alongside {csv}\n\
         set datafile separator ','\n\
         set terminal pngcairo size 1000,720\n\
         set output '{csv}.png'\n\
         set multiplot layout 2,1\n\
         set xlabel '{xl}'\n\
         set ylabel 'KKT residual'\n\
         set logscale y\n\
         plot '{csv}' skip 1 using {x}:(column(8)) with lines lw 2 title 'residual'\n\
         unset logscale y\n\
         set ylabel 'atan(second-order measure)'\n\
         plot '{csv}' skip 1 using {x}:(atan(column(12))) with lines lw 2 title 'second-order stationarity', 0 with lines dt 2 lc 'black' notitle\n\
         unset multiplot\n",
        csv = csv_path,
        xl = x_label,
        x = x_expr,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn falls_back_to_row_index_without_timing() {
        let r = RunRecord {
            outer_iter: 0,
            inner_iter: 0,
            elapsed_s: 0.0,
            mu: 0.1,
            delta: 1.0,
            f: 0.0,
            merit: 0.0,
            residual_total: 1.0,
            grad_lag_norm: 1.0,
            compl_norm: 0.0,
            min_eig_h: 1.0,
            second_order_measure: 1.0,
            accepted: false,
            status: "step".into(),
        };
        let script = gnuplot_script("t.csv", std::slice::from_ref(&r));
        assert!(script.contains("($0)"));
        let mut timed = r;
        timed.elapsed_s = 0.5;
        let script = gnuplot_script("t.csv", &[timed]);
        assert!(script.contains("(column(3))"));
    }
}
