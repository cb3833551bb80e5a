use super::{rk4_step, Dq, FilterParams};

/// Advances the RL filter currents by one RK4 step in a frame rotating at
/// `omega`:
///
/// ```text
/// L di_d/dt = v_inv_d - v_grid_d - R i_d + w L i_q
/// L di_q/dt = v_inv_q - v_grid_q - R i_q - w L i_d
/// ```
///
/// The inverter is an average model, so `v_inv` is exactly the commanded
/// voltage, held over the step.
pub fn plant_step(
    currents: Dq,
    v_inv: Dq,
    v_grid: Dq,
    omega: f64,
    filter: &FilterParams,
    dt: f64,
) -> Dq {
    let (l, r) = (filter.l_f, filter.r_f);
    let f = |i: &[f64; 2]| {
        [
            (v_inv.d - v_grid.d - r * i[0]) / l + omega * i[1],
            (v_inv.q - v_grid.q - r * i[1]) / l - omega * i[0],
        ]
    };
    let [d, q] = rk4_step(f, [currents.d, currents.q], dt);
    Dq { d, q }
}
