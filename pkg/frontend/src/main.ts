import { HttpApiClient } from './api.js'
import { EDGES, triangleLayout } from './layout.js'
import { AnnotationSession } from './session.js'

const TILE = 96

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (cls) node.className = cls
  return node
}

function start(root: HTMLElement, worker: string): void {
  const session = new AnnotationSession(new HttpApiClient(), worker)
  const stage = el('div', 'stage')
  const counter = el('div', 'counter')
  const banner = el('div', 'banner')
  const images = [el('img'), el('img'), el('img')]
  const buttons = EDGES.map((_, n) => {
    const b = el('button', 'pair-btn')
    b.textContent = `${n + 1}`
    b.title = 'these two are most similar'
    return b
  })
  images.forEach((img) => {
    img.width = TILE
    img.height = TILE
    stage.appendChild(img)
  })
  buttons.forEach((b) => stage.appendChild(b))
  root.append(counter, banner, stage)

  function reposition(): void {
    const layout = triangleLayout(stage.clientWidth, stage.clientHeight, TILE / 2 + 16)
    layout.vertices.forEach((v, n) => {
      images[n].style.left = `${v.x - TILE / 2}px`
      images[n].style.top = `${v.y - TILE / 2}px`
    })
    layout.edgeMidpoints.forEach((m, n) => {
      buttons[n].style.left = `${m.x - 24}px`
      buttons[n].style.top = `${m.y - 16}px`
    })
  }

  function repaint(): void {
    counter.textContent = `worker ${session.worker} — answered ${session.answered}`
    banner.textContent = session.lastError ?? ''
    banner.style.display = session.lastError ? 'block' : 'none'
    const ready = session.state === 'ready' || session.state === 'error'
    buttons.forEach((b) => (b.disabled = !ready))
    if (session.task) {
      session.displayImageUrls().forEach((url, n) => {
        if (images[n].getAttribute('src') !== url) images[n].setAttribute('src', url)
      })
    }
    reposition()
  }

  async function submit(edgeIndex: number): Promise<void> {
    await session.submitEdge(EDGES[edgeIndex])
    repaint()
  }

  buttons.forEach((b, n) => b.addEventListener('click', () => void submit(n)))
  document.addEventListener('keydown', (ev) => {
    const n = ['1', '2', '3'].indexOf(ev.key)
    if (n >= 0) void submit(n)
  })
  window.addEventListener('resize', reposition)

  void session.next().then(repaint)
}

function boot(): void {
  const root = document.getElementById('app')
  if (!root) return
  const form = el('form', 'worker-form')
  const input = el('input')
  input.placeholder = 'worker id'
  const go = el('button')
  go.textContent = 'start'
  form.append(input, go)
  root.appendChild(form)
  form.addEventListener('submit', (ev) => {
    ev.preventDefault()
    const worker = input.value.trim()
    if (!worker) return
    root.removeChild(form)
    start(root, worker)
  })
}

boot()
