use super::{normal_equations, require_anchors, ObservationSet};
use crate::math::cholesky_solve4;
use crate::{Error, Result, Vec3};

/// Closed-form linear least squares on `[x, y, z, |p|^2]`.
pub fn localize_ls(obs: &ObservationSet) -> Result<Vec3> {
    require_anchors(obs, 4)?;
    let (ata, atb) = normal_equations(obs);
    let u = cholesky_solve4(&ata, &atb).ok_or(Error::SingularGeometry)?;
    Ok(Vec3::new(u[0], u[1], u[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AnchorReport;
    use alloc::vec::Vec;

    pub(crate) fn exact_obs(anchors: &[Vec3], target: Vec3) -> ObservationSet {
        let reports: Vec<AnchorReport> = anchors
            .iter()
            .enumerate()
            .map(|(i, &a)| AnchorReport {
                anchor_id: i as u32,
                reported_pos: a,
                reported_sigma_p: 0.0,
                measured_distance: a.distance(target),
            })
            .collect();
        ObservationSet::new(0, reports).unwrap()
    }

    #[test]
    fn recovers_exact_position() {
        let anchors = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
            Vec3::new(0.0, 0.0, 10.0),
        ];
        let p = localize_ls(&exact_obs(&anchors, Vec3::new(2.0, 3.0, 4.0))).unwrap();
        assert!(p.distance(Vec3::new(2.0, 3.0, 4.0)) < 1e-6);
    }

    #[test]
    fn coplanar_anchors_are_singular() {
        let anchors = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
            Vec3::new(10.0, 10.0, 0.0),
        ];
        assert_eq!(
            localize_ls(&exact_obs(&anchors, Vec3::new(2.0, 3.0, 4.0))),
            Err(Error::SingularGeometry)
        );
    }

    #[test]
    fn too_few_anchors() {
        let anchors = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)];
        assert_eq!(
            localize_ls(&exact_obs(&anchors, Vec3::new(1.0, 1.0, 1.0))),
            Err(Error::TooFewAnchors { needed: 4, got: 2 })
        );
    }
}
