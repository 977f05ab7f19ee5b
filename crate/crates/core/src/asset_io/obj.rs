use std::path::{Path, PathBuf};

use glam::{DVec2, DVec3};

use super::{AssetError, Corner, Face, TriangleMesh};

/// Result of loading an OBJ file.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    /// Triangles dropped because they have zero area in object space.
    pub degenerate_dropped: usize,
    /// `mtllib` references, in file order.
    pub material_libs: Vec<String>,
}

pub fn load_mesh(path: &Path) -> Result<LoadedMesh, AssetError> {
    let text = std::fs::read_to_string(path).map_err(|e| AssetError::io(path, e))?;
    parse_obj(&text)
}

fn parse_err(line: usize, message: impl Into<String>) -> AssetError {
    AssetError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_floats<'a>(
    tokens: impl Iterator<Item = &'a str>,
    line: usize,
    min: usize,
) -> Result<Vec<f64>, AssetError> {
    let values = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid number `{t}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() < min {
        return Err(parse_err(
            line,
            format!("expected at least {min} values, found {}", values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(line, "non-finite coordinate"));
    }
    Ok(values)
}

/// OBJ indices are 1-based; negative values count back from the end.
fn resolve_index(token: &str, len: usize, line: usize, kind: &str) -> Result<u32, AssetError> {
    let raw: i64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {kind} index `{token}`")))?;
    let resolved = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        len as i64 + raw
    } else {
        return Err(parse_err(line, format!("{kind} index 0 is not valid")));
    };
    if resolved < 0 || resolved as usize >= len {
        return Err(parse_err(
            line,
            format!("{kind} index {raw} out of range ({len} defined)"),
        ));
    }
    Ok(resolved as u32)
}

/// Parse OBJ text. Polygons are fan-triangulated from their first corner and
/// zero-area triangles are dropped.
pub fn parse_obj(text: &str) -> Result<LoadedMesh, AssetError> {
    let mut positions = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut material_libs = Vec::new();
    let mut degenerate = 0usize;

    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let v = parse_floats(tokens, line_no, 3)?;
                positions.push(DVec3::new(v[0], v[1], v[2]));
            }
            "vt" => {
                let v = parse_floats(tokens, line_no, 1)?;
                uvs.push(DVec2::new(v[0], v.get(1).copied().unwrap_or(0.0)));
            }
            "vn" => {
                let v = parse_floats(tokens, line_no, 3)?;
                normals.push(DVec3::new(v[0], v[1], v[2]).normalize_or_zero());
            }
            "f" => {
                let mut corners = Vec::new();
                for token in tokens {
                    let mut parts = token.split('/');
                    let p = parts.next().unwrap_or("");
                    let t = parts.next().unwrap_or("");
                    let n = parts.next().unwrap_or("");
                    let position = resolve_index(p, positions.len(), line_no, "vertex")?;
                    if t.is_empty() {
                        return Err(AssetError::MissingUvs { line: line_no });
                    }
                    let uv = resolve_index(t, uvs.len(), line_no, "texture")?;
                    let normal = if n.is_empty() {
                        None
                    } else {
                        Some(resolve_index(n, normals.len(), line_no, "normal")?)
                    };
                    corners.push(Corner {
                        position,
                        uv,
                        normal,
                    });
                }
                if corners.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least 3 corners"));
                }
                for k in 1..corners.len() - 1 {
                    let face = [corners[0], corners[k], corners[k + 1]];
                    if is_degenerate(&positions, &face) {
                        degenerate += 1;
                    } else {
                        faces.push(face);
                    }
                }
            }
            "mtllib" => {
                let rest = line["mtllib".len()..].trim();
                if !rest.is_empty() {
                    material_libs.push(rest.to_string());
                }
            }
            // Groups, objects, smoothing groups, material switches, lines
            // and points carry nothing the pipeline needs.
            _ => {}
        }
    }

    if degenerate > 0 {
        log::warn!("dropped {degenerate} zero-area triangle(s)");
    }
    let mesh = TriangleMesh::new(positions, uvs, normals, faces)?;
    Ok(LoadedMesh {
        mesh,
        degenerate_dropped: degenerate,
        material_libs,
    })
}

fn is_degenerate(positions: &[DVec3], face: &Face) -> bool {
    let a = positions[face[0].position as usize];
    let b = positions[face[1].position as usize];
    let c = positions[face[2].position as usize];
    let doubled_area = (b - a).cross(c - a).length();
    let longest = (b - a)
        .length_squared()
        .max((c - b).length_squared())
        .max((a - c).length_squared());
    doubled_area <= longest * 1e-12
}

/// Find the diffuse texture (`map_Kd`) named by the OBJ's material library.
pub fn locate_albedo(obj_path: &Path) -> Result<Option<PathBuf>, AssetError> {
    let text = std::fs::read_to_string(obj_path).map_err(|e| AssetError::io(obj_path, e))?;
    let dir = obj_path.parent().unwrap_or_else(|| Path::new("."));
    for line in text.lines() {
        let line = line.trim();
        let Some(lib) = line.strip_prefix("mtllib") else {
            continue;
        };
        let lib_path = dir.join(lib.trim());
        let Ok(mtl) = std::fs::read_to_string(&lib_path) else {
            continue;
        };
        for mtl_line in mtl.lines() {
            if let Some(map) = mtl_line.trim().strip_prefix("map_Kd") {
                // Options such as `-s` precede the file name; the name is last.
                if let Some(name) = map.split_whitespace().last() {
                    return Ok(Some(lib_path.parent().unwrap_or(dir).join(name)));
                }
            }
        }
    }
    Ok(None)
}
