//! WGS84 points, GeoRSS Simple shapes, and great-circle distance.

use thiserror::Error;

/// Mean Earth radius in kilometers, used by all distance computations.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct GeoError(pub String);

/// A WGS84 coordinate, degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(GeoError(format!("latitude {lat} out of range [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(GeoError(format!("longitude {lon} out of range [-180, 180]")));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// A GeoRSS Simple geometry. Box stores southwest then northeast corner.
#[derive(Debug, Clone, PartialEq)]
pub enum GeoShape {
    Point(GeoPoint),
    Line(Vec<GeoPoint>),
    Polygon(Vec<GeoPoint>),
    Box { sw: GeoPoint, ne: GeoPoint },
}

impl GeoShape {
    pub fn point(lat: f64, lon: f64) -> Result<Self, GeoError> {
        Ok(GeoShape::Point(GeoPoint::new(lat, lon)?))
    }

    pub fn line(points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if points.len() < 2 {
            return Err(GeoError(format!("line needs at least 2 points, got {}", points.len())));
        }
        Ok(GeoShape::Line(points))
    }

    /// Points describe the ring; an explicit closing point equal to the first
    /// is dropped. At least 3 distinct vertices are required.
    pub fn polygon(mut points: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if points.len() >= 4 && points.first() == points.last() {
            points.pop();
        }
        let distinct = distinct_count(&points);
        if distinct < 3 {
            return Err(GeoError(format!(
                "polygon needs at least 3 distinct points, got {distinct}"
            )));
        }
        Ok(GeoShape::Polygon(points))
    }

    pub fn bbox(sw: GeoPoint, ne: GeoPoint) -> Result<Self, GeoError> {
        if sw.lat > ne.lat {
            return Err(GeoError(format!(
                "box southwest latitude {} exceeds northeast latitude {}",
                sw.lat, ne.lat
            )));
        }
        Ok(GeoShape::Box { sw, ne })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            GeoShape::Point(_) => "point",
            GeoShape::Line(_) => "line",
            GeoShape::Polygon(_) => "polygon",
            GeoShape::Box { .. } => "box",
        }
    }

    pub fn coords(&self) -> Vec<GeoPoint> {
        match self {
            GeoShape::Point(p) => vec![*p],
            GeoShape::Line(ps) | GeoShape::Polygon(ps) => ps.clone(),
            GeoShape::Box { sw, ne } => vec![*sw, *ne],
        }
    }

    /// The single coordinate a shape reduces to for predicate evaluation:
    /// a point is itself, a box reduces to its midpoint, lines and polygons
    /// to the arithmetic mean of their vertices.
    pub fn representative_point(&self) -> GeoPoint {
        match self {
            GeoShape::Point(p) => *p,
            GeoShape::Box { sw, ne } => GeoPoint {
                lat: (sw.lat + ne.lat) / 2.0,
                lon: (sw.lon + ne.lon) / 2.0,
            },
            GeoShape::Line(ps) | GeoShape::Polygon(ps) => {
                let n = ps.len() as f64;
                GeoPoint {
                    lat: ps.iter().map(|p| p.lat).sum::<f64>() / n,
                    lon: ps.iter().map(|p| p.lon).sum::<f64>() / n,
                }
            }
        }
    }

    /// Re-checks all shape invariants; used by feed validation on values
    /// that may have been constructed field-by-field.
    pub fn check(&self) -> Result<(), GeoError> {
        for p in self.coords() {
            GeoPoint::new(p.lat, p.lon)?;
        }
        match self {
            GeoShape::Point(_) => Ok(()),
            GeoShape::Line(ps) if ps.len() < 2 => Err(GeoError("line needs at least 2 points".into())),
            GeoShape::Line(_) => Ok(()),
            GeoShape::Polygon(ps) if distinct_count(ps) < 3 => {
                Err(GeoError("polygon needs at least 3 distinct points".into()))
            }
            GeoShape::Polygon(_) => Ok(()),
            GeoShape::Box { sw, ne } if sw.lat > ne.lat => {
                Err(GeoError("box southwest latitude exceeds northeast latitude".into()))
            }
            GeoShape::Box { .. } => Ok(()),
        }
    }
}

fn distinct_count(points: &[GeoPoint]) -> usize {
    let mut distinct: Vec<GeoPoint> = Vec::new();
    for p in points {
        if !distinct.contains(p) {
            distinct.push(*p);
        }
    }
    distinct.len()
}

/// Great-circle distance in kilometers (haversine formula).
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat_a = a.lat.to_radians();
    let lat_b = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();

    let h = (dlat / 2.0).sin().powi(2) + lat_a.cos() * lat_b.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A query region: either a radius around a center or a lat/lon box.
#[derive(Debug, Clone, PartialEq)]
pub enum GeoRegion {
    Radius { center: GeoPoint, km: f64 },
    Box { sw: GeoPoint, ne: GeoPoint },
}

impl GeoRegion {
    pub fn radius(center: GeoPoint, km: f64) -> Result<Self, GeoError> {
        if !(km > 0.0) || !km.is_finite() {
            return Err(GeoError(format!("radius must be positive, got {km}")));
        }
        Ok(GeoRegion::Radius { center, km })
    }

    pub fn bbox(sw: GeoPoint, ne: GeoPoint) -> Result<Self, GeoError> {
        if sw.lat > ne.lat {
            return Err(GeoError(format!(
                "box southwest latitude {} exceeds northeast latitude {}",
                sw.lat, ne.lat
            )));
        }
        Ok(GeoRegion::Box { sw, ne })
    }

    /// Box containment does not wrap across the antimeridian.
    pub fn contains(&self, p: GeoPoint) -> bool {
        match self {
            GeoRegion::Radius { center, km } => haversine_km(*center, p) <= *km,
            GeoRegion::Box { sw, ne } => {
                p.lat >= sw.lat && p.lat <= ne.lat && p.lon >= sw.lon && p.lon <= ne.lon
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representative_point_identity_for_point() {
        let s = GeoShape::point(10.0, 20.0).unwrap();
        assert_eq!(s.representative_point(), GeoPoint { lat: 10.0, lon: 20.0 });
    }

    #[test]
    fn representative_point_box_midpoint() {
        let s = GeoShape::bbox(
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(10.0, 10.0).unwrap(),
        )
        .unwrap();
        assert_eq!(s.representative_point(), GeoPoint { lat: 5.0, lon: 5.0 });
    }

    #[test]
    fn representative_point_line_mean() {
        // mean of (0,0), (0,2), (0,4) is (0,2)
        let s = GeoShape::line(vec![
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(0.0, 2.0).unwrap(),
            GeoPoint::new(0.0, 4.0).unwrap(),
        ])
        .unwrap();
        let rp = s.representative_point();
        assert_eq!(rp.lat, 0.0);
        assert_eq!(rp.lon, 2.0);
    }

    #[test]
    fn polygon_drops_explicit_closure() {
        let pts: Vec<GeoPoint> = [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.0, 0.0)]
            .iter()
            .map(|&(a, b)| GeoPoint::new(a, b).unwrap())
            .collect();
        let s = GeoShape::polygon(pts).unwrap();
        assert_eq!(s.coords().len(), 3);
    }

    #[test]
    fn polygon_rejects_degenerate() {
        let pts: Vec<GeoPoint> = [(0.0, 0.0), (0.0, 1.0), (0.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|&(a, b)| GeoPoint::new(a, b).unwrap())
            .collect();
        assert!(GeoShape::polygon(pts).is_err());
    }

    #[test]
    fn latitude_out_of_range() {
        assert!(GeoPoint::new(95.0, 0.0).is_err());
        assert!(GeoPoint::new(-95.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 181.0).is_err());
    }

    #[test]
    fn haversine_symmetry_and_zero() {
        let a = GeoPoint::new(37.87, -122.26).unwrap();
        let b = GeoPoint::new(48.2, 16.37).unwrap();
        assert_eq!(haversine_km(a, b), haversine_km(b, a));
        assert_eq!(haversine_km(a, a), 0.0);
    }

    #[test]
    fn haversine_one_degree_on_equator() {
        // One degree along the equator: R * pi/180 = 111.19492664...
        let d = haversine_km(GeoPoint::new(0.0, 0.0).unwrap(), GeoPoint::new(0.0, 1.0).unwrap());
        assert!((d - 111.195).abs() < 0.01, "got {d}");
    }

    #[test]
    fn region_contains() {
        let r = GeoRegion::radius(GeoPoint::new(0.0, 0.0).unwrap(), 200.0).unwrap();
        assert!(r.contains(GeoPoint::new(0.0, 1.0).unwrap()));
        assert!(!r.contains(GeoPoint::new(0.0, 2.0).unwrap()));
        let b = GeoRegion::bbox(
            GeoPoint::new(-1.0, -1.0).unwrap(),
            GeoPoint::new(1.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(b.contains(GeoPoint::new(0.5, 0.5).unwrap()));
        assert!(!b.contains(GeoPoint::new(1.5, 0.5).unwrap()));
    }
}
