// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Benjamini–Hochberg false discovery rate control.

use super::ValidationError;

/// Largest sorted p-value `p_(k)` with `p_(k) <= k * alpha / m`, or `None`
/// when no hypothesis is rejected. Every p-value `<=` the cutoff is rejected.
pub fn bh_threshold(pvalues: &[f64], alpha: f64) -> Result<Option<f64>, ValidationError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ValidationError::InvalidAlpha(alpha));
    }
    if let Some(&bad) = pvalues.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ValidationError::InvalidPValue(bad));
    }
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .rev()
        .find(|(i, &p)| p <= (*i as f64 + 1.0) * alpha / m)
        .map(|(_, &p)| p))
}
