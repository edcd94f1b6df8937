//! Level-set surface extraction by marching tetrahedra.
//!
//! Each grid cell splits into six tetrahedra; a scalar field is linear on
//! each, so its level surface intersects a tetrahedron in a triangle or a
//! quad (two triangles). Used for surface quadrature over travel-time level
//! sets in the coarea self-check.

use crate::grid::Grid3;

/// Triangles (vertex triples) of the level surface `field = level`.
pub fn extract_isosurface(field: &Grid3, level: f64) -> Vec<[[f64; 3]; 3]> {
    let geom = field.geom;
    let [nx, ny, nz] = geom.dims;
    let mut tris = Vec::new();
    // Tetrahedra of the unit cube: each consecutive pair of corners flips
    // one coordinate, walking 000 -> 111 along all six permutations.
    const TETS: [[usize; 4]; 6] = [
        [0b000, 0b001, 0b011, 0b111],
        [0b000, 0b001, 0b101, 0b111],
        [0b000, 0b010, 0b011, 0b111],
        [0b000, 0b010, 0b110, 0b111],
        [0b000, 0b100, 0b101, 0b111],
        [0b000, 0b100, 0b110, 0b111],
    ];
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut corner_pos = [[0.0f64; 3]; 8];
                let mut corner_val = [0.0f64; 8];
                for (c, (pos, val)) in corner_pos.iter_mut().zip(corner_val.iter_mut()).enumerate()
                {
                    let di = c & 1;
                    let dj = (c >> 1) & 1;
                    let dk = (c >> 2) & 1;
                    *pos = geom.node(i + di, j + dj, k + dk);
                    *val = field.at(i + di, j + dj, k + dk);
                }
                for tet in TETS {
                    march_tet(
                        [
                            corner_pos[tet[0]],
                            corner_pos[tet[1]],
                            corner_pos[tet[2]],
                            corner_pos[tet[3]],
                        ],
                        [
                            corner_val[tet[0]],
                            corner_val[tet[1]],
                            corner_val[tet[2]],
                            corner_val[tet[3]],
                        ],
                        level,
                        &mut tris,
                    );
                }
            }
        }
    }
    tris
}

fn lerp(a: [f64; 3], b: [f64; 3], va: f64, vb: f64, level: f64) -> [f64; 3] {
    let t = if (vb - va).abs() < 1e-300 { 0.5 } else { (level - va) / (vb - va) };
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

fn march_tet(pos: [[f64; 3]; 4], val: [f64; 4], level: f64, tris: &mut Vec<[[f64; 3]; 3]>) {
    let mut above = [false; 4];
    let mut n_above = 0;
    for (a, &v) in above.iter_mut().zip(val.iter()) {
        *a = v >= level;
        if *a {
            n_above += 1;
        }
    }
    match n_above {
        0 | 4 => {}
        1 | 3 => {
            // One vertex separated: a single triangle.
            let lone = (0..4).find(|&i| above[i] == (n_above == 1)).unwrap();
            let others: Vec<usize> = (0..4).filter(|&i| i != lone).collect();
            let p0 = lerp(pos[lone], pos[others[0]], val[lone], val[others[0]], level);
            let p1 = lerp(pos[lone], pos[others[1]], val[lone], val[others[1]], level);
            let p2 = lerp(pos[lone], pos[others[2]], val[lone], val[others[2]], level);
            tris.push([p0, p1, p2]);
        }
        2 => {
            // Two/two split: a quad, emitted as two triangles.
            let hi: Vec<usize> = (0..4).filter(|&i| above[i]).collect();
            let lo: Vec<usize> = (0..4).filter(|&i| !above[i]).collect();
            let q0 = lerp(pos[hi[0]], pos[lo[0]], val[hi[0]], val[lo[0]], level);
            let q1 = lerp(pos[hi[0]], pos[lo[1]], val[hi[0]], val[lo[1]], level);
            let q2 = lerp(pos[hi[1]], pos[lo[1]], val[hi[1]], val[lo[1]], level);
            let q3 = lerp(pos[hi[1]], pos[lo[0]], val[hi[1]], val[lo[0]], level);
            tris.push([q0, q1, q2]);
            tris.push([q0, q2, q3]);
        }
        _ => unreachable!(),
    }
}

/// Area of a triangle.
pub fn triangle_area(t: &[[f64; 3]; 3]) -> f64 {
    let u = [t[1][0] - t[0][0], t[1][1] - t[0][1], t[1][2] - t[0][2]];
    let v = [t[2][0] - t[0][0], t[2][1] - t[0][1], t[2][2] - t[0][2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Centroid of a triangle.
pub fn triangle_centroid(t: &[[f64; 3]; 3]) -> [f64; 3] {
    [
        (t[0][0] + t[1][0] + t[2][0]) / 3.0,
        (t[0][1] + t[1][1] + t[2][1]) / 3.0,
        (t[0][2] + t[1][2] + t[2][2]) / 3.0,
    ]
}
