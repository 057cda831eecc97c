Grasp('left', \
  'plug')
