/** Equilateral triangle geometry: the three images sit at the vertices
 * so their pairwise on-screen distances are equal and cannot bias the
 * similarity judgement; the three pair buttons sit at the edge midpoints.
 */

export interface Point {
  x: number
  y: number
}

export interface TriangleLayout {
  vertices: [Point, Point, Point]
  edgeMidpoints: [Point, Point, Point]
  side: number
}

/** Display-position pairs of the three edges, in button order. */
export const EDGES: ReadonlyArray<readonly [number, number]> = [
  [0, 1],
  [0, 2],
  [1, 2],
]

const SQRT3_2 = Math.sqrt(3) / 2

/**
 * Largest upright equilateral triangle (apex on top) fitting a width x
 * height box once `inset` is reserved on every side for the image tiles.
 */
export function triangleLayout(width: number, height: number, inset = 60): TriangleLayout {
  const usableW = Math.max(width - 2 * inset, 10)
  const usableH = Math.max(height - 2 * inset, 10)
  const side = Math.min(usableW, usableH / SQRT3_2)
  const triHeight = side * SQRT3_2
  const cx = width / 2
  const top = (height - triHeight) / 2
  const vertices: [Point, Point, Point] = [
    { x: cx, y: top },
    { x: cx - side / 2, y: top + triHeight },
    { x: cx + side / 2, y: top + triHeight },
  ]
  const edgeMidpoints = EDGES.map(([a, b]) => ({
    x: (vertices[a].x + vertices[b].x) / 2,
    y: (vertices[a].y + vertices[b].y) / 2,
  })) as [Point, Point, Point]
  return { vertices, edgeMidpoints, side }
}

export function edgeLengths(layout: TriangleLayout): [number, number, number] {
  return EDGES.map(([a, b]) => {
    const dx = layout.vertices[a].x - layout.vertices[b].x
    const dy = layout.vertices[a].y - layout.vertices[b].y
    return Math.hypot(dx, dy)
  }) as [number, number, number]
}
